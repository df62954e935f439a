use crate::error::{Error, Result};
use crate::plant::PlantState;

/// A state vector the fixed-step integrator can work on.
pub trait OdeState: Copy {
    /// `self + h * k`
    fn axpy(&self, k: &Self, h: f64) -> Self;
    fn all_finite(&self) -> bool;
    /// Projection applied after each completed step.
    fn project(self) -> Self {
        self
    }
}

impl OdeState for f64 {
    fn axpy(&self, k: &Self, h: f64) -> Self {
        self + h * k
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl OdeState for PlantState {
    fn axpy(&self, k: &Self, h: f64) -> Self {
        PlantState::new(self.i_l + h * k.i_l, self.v_c + h * k.v_c)
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }

    /// The diode blocks reverse inductor current.
    fn project(mut self) -> Self {
        if self.i_l < 0.0 {
            self.i_l = 0.0;
        }
        self
    }
}

/// One classical fourth-order Runge-Kutta step of size `h` from `(t, state)`.
///
/// The derivative function receives the state and time and returns the
/// state derivative. A non-finite stage aborts with [`Error::Diverged`].
pub fn rk4_step<S, F>(mut derivative: F, state: S, t: f64, h: f64) -> Result<S>
where
    S: OdeState,
    F: FnMut(&S, f64) -> S,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step size {h} must be positive")));
    }
    let half = 0.5 * h;
    let k1 = derivative(&state, t);
    let k2 = derivative(&state.axpy(&k1, half), t + half);
    let k3 = derivative(&state.axpy(&k2, half), t + half);
    let k4 = derivative(&state.axpy(&k3, h), t + h);
    if ![k1, k2, k3, k4].iter().all(OdeState::all_finite) {
        return Err(Error::Diverged { t });
    }
    let next = state
        .axpy(&k1, h / 6.0)
        .axpy(&k2, h / 3.0)
        .axpy(&k3, h / 3.0)
        .axpy(&k4, h / 6.0);
    if !next.all_finite() {
        return Err(Error::Diverged { t });
    }
    Ok(next.project())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_one_step() {
        // Taylor series of e^{-h} through h^4: 1 - h + h^2/2 - h^3/6 + h^4/24
        let h: f64 = 0.1;
        let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        let x = rk4_step(|x: &f64, _| -x, 1.0, 0.0, h).unwrap();
        assert!((x - taylor).abs() < 1e-15);
        assert!((x - 0.90483750).abs() < 5e-9, "{x}");
        assert!((x - (-h).exp()).abs() < 1e-7);
    }

    #[test]
    fn zero_derivative_is_identity() {
        let x = PlantState::new(0.3, 17.0);
        let y = rk4_step(|_: &PlantState, _| PlantState::default(), x, 0.0, 1e-3).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn step_halving_order() {
        let exact = |t: f64| (-t).exp();
        let one_step = |h: f64| (rk4_step(|x: &f64, _| -x, 1.0, 0.0, h).unwrap() - exact(h)).abs();
        let global = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut x = 1.0;
            for i in 0..n {
                x = rk4_step(|x: &f64, _| -x, x, i as f64 * h, h).unwrap();
            }
            (x - exact(1.0)).abs()
        };
        let local_ratio = one_step(0.1) / one_step(0.05);
        assert!((local_ratio - 32.0).abs() < 2.0, "{local_ratio}");
        let global_ratio = global(0.1) / global(0.05);
        assert!((global_ratio - 16.0).abs() < 1.0, "{global_ratio}");
    }

    #[test]
    fn non_finite_derivative_aborts() {
        let err = rk4_step(|_: &f64, _| f64::NAN, 1.0, 0.25, 0.1).unwrap_err();
        assert!(matches!(err, Error::Diverged { t } if t == 0.25));
    }

    #[test]
    fn clips_negative_current() {
        let x = rk4_step(
            |_: &PlantState, _| PlantState::new(-100.0, 0.0),
            PlantState::new(0.01, 5.0),
            0.0,
            1e-3,
        )
        .unwrap();
        assert_eq!(x.i_l, 0.0);
    }
}
