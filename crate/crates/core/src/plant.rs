//! Boost converter models.
//!
//! The state is `x = (i_L, v_C)`. Over one switching period the circuit
//! passes through up to three intervals: switch on (`d1`), diode conducting
//! (`d2`) and, in DCM, both off with zero inductor current (`1 - d1 - d2`).
//! [`averaged_dynamics`] is the corrected full-order averaged model that covers
//! both conduction modes; [`switched_step`] integrates the intervals directly
//! and serves as its cycle-accurate reference.

use std::fmt;

use crate::error::{ensure_finite, Error, Result};
use crate::sim::rk4_step;

/// Below this margin over E the DCM off-duty relation is not evaluated.
pub const VOLTAGE_GUARD: f64 = 1e-9;

const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    /// L in henries.
    pub inductance: f64,
    /// C in farads.
    pub capacitance: f64,
    /// Load R in ohms.
    pub resistance: f64,
    /// Input voltage E in volts.
    pub input_voltage: f64,
    /// fc in hertz.
    pub switching_frequency: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            inductance: 10e-3,
            capacitance: 47e-6,
            resistance: 100.0,
            input_voltage: 12.0,
            switching_frequency: 10e3,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        for (value, what) in [
            (self.inductance, "l"),
            (self.capacitance, "c"),
            (self.resistance, "r"),
            (self.input_voltage, "e"),
            (self.switching_frequency, "fc"),
        ] {
            ensure_finite(value, what)?;
            if value <= 0.0 {
                return Err(Error::invalid(format!("{what} must be positive")));
            }
        }
        Ok(())
    }

    /// Switching period `Ts = 1 / fc`.
    pub fn period(&self) -> f64 {
        1.0 / self.switching_frequency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    /// Averaged inductor current in amperes.
    pub i_l: f64,
    /// Averaged capacitor voltage in volts.
    pub v_c: f64,
}

impl PlantState {
    pub fn new(i_l: f64, v_c: f64) -> Self {
        Self { i_l, v_c }
    }

    pub fn is_finite(&self) -> bool {
        self.i_l.is_finite() && self.v_c.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConductionMode {
    Ccm,
    Dcm,
}

impl ConductionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConductionMode::Ccm => "CCM",
            ConductionMode::Dcm => "DCM",
        }
    }
}

impl fmt::Display for ConductionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ConductionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CCM" => Ok(ConductionMode::Ccm),
            "DCM" => Ok(ConductionMode::Dcm),
            other => Err(Error::invalid(format!("unknown conduction mode `{other}`"))),
        }
    }
}

/// Time derivative of the averaged state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub di_l: f64,
    pub dv_c: f64,
    pub mode: ConductionMode,
}

pub(crate) fn check_duty(d1: f64) -> Result<()> {
    ensure_finite(d1, "duty")?;
    if !(0.0..1.0).contains(&d1) {
        return Err(Error::invalid(format!("duty {d1} outside [0, 1)")));
    }
    Ok(())
}

fn select(d1: f64, d2_dcm: f64) -> (f64, ConductionMode) {
    let d2_ccm = 1.0 - d1;
    if d2_ccm <= d2_dcm + TIE_TOLERANCE {
        (d2_ccm, ConductionMode::Ccm)
    } else {
        (d2_dcm, ConductionMode::Dcm)
    }
}

/// Static off-duty relation: `d2 = min(1 - d1, E d1 / (v_C - E))`.
///
/// This is the steady-state d2 of each mode expressed through the output
/// voltage. Below `E + VOLTAGE_GUARD` the converter is treated as CCM.
pub fn effective_off_duty(
    d1: f64,
    v_c: f64,
    params: &BoostParams,
) -> Result<(f64, ConductionMode)> {
    check_duty(d1)?;
    ensure_finite(v_c, "capacitor voltage")?;
    let e = params.input_voltage;
    if v_c <= e + VOLTAGE_GUARD {
        return Ok((1.0 - d1, ConductionMode::Ccm));
    }
    Ok(select(d1, e * d1 / (v_c - e)))
}

/// Dynamic off-duty used by the averaged model.
///
/// In DCM the inductor current ramps from zero to `E d1 Ts / L` and back,
/// so its period average `i_L = E d1 (d1 + d2) / (2 L fc)` fixes
/// `d2 = 2 L fc i_L / (E d1) - d1`. The result is capped at `1 - d1` (CCM).
/// At equilibrium it coincides with [`effective_off_duty`].
pub fn current_off_duty(
    d1: f64,
    state: &PlantState,
    params: &BoostParams,
) -> Result<(f64, ConductionMode)> {
    check_duty(d1)?;
    Ok(current_off_duty_unchecked(d1, state, params))
}

fn current_off_duty_unchecked(
    d1: f64,
    state: &PlantState,
    params: &BoostParams,
) -> (f64, ConductionMode) {
    let e = params.input_voltage;
    if state.v_c <= e + VOLTAGE_GUARD {
        return (1.0 - d1, ConductionMode::Ccm);
    }
    let i_l = state.i_l.max(0.0);
    if d1 == 0.0 {
        // no on-time: a positive current keeps the diode on all period
        return if i_l > 0.0 {
            (1.0, ConductionMode::Ccm)
        } else {
            (0.0, ConductionMode::Dcm)
        };
    }
    let d2_dcm =
        (2.0 * params.inductance * params.switching_frequency * i_l / (e * d1) - d1).max(0.0);
    select(d1, d2_dcm)
}

/// Corrected full-order averaged model.
///
/// ```text
/// di_L/dt = -(d2/L) v_C + ((d1 + d2)/L) E
/// dv_C/dt = (d2 / (C (d1 + d2))) i_L - v_C / (R C)
/// ```
///
/// The `1/(d1 + d2)` factor is the correction applied to the current state;
/// it is taken as zero when `d1 + d2 = 0`. In CCM this is the classical
/// averaged boost model.
pub fn averaged_dynamics(state: &PlantState, d1: f64, params: &BoostParams) -> Result<Derivative> {
    check_duty(d1)?;
    if !state.is_finite() {
        return Err(Error::NonFinite("plant state"));
    }
    Ok(averaged_rhs(state, d1, params))
}

/// [`averaged_dynamics`] without argument checks; `d1` must lie in `[0, 1)`.
pub(crate) fn averaged_rhs(state: &PlantState, d1: f64, params: &BoostParams) -> Derivative {
    let (d2, mode) = current_off_duty_unchecked(d1, state, params);
    let (l, c, r, e) = (
        params.inductance,
        params.capacitance,
        params.resistance,
        params.input_voltage,
    );
    let conducting = d1 + d2;
    let quotient = if conducting > 0.0 {
        d2 / conducting
    } else {
        0.0
    };
    Derivative {
        di_l: -(d2 / l) * state.v_c + (conducting / l) * e,
        dv_c: quotient * state.i_l / c - state.v_c / (r * c),
        mode,
    }
}

/// CCM conversion ratio `V/E = 1 / (1 - d1)`.
pub fn ccm_static_gain(d1: f64) -> Result<f64> {
    check_duty(d1)?;
    Ok(1.0 / (1.0 - d1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcmOperatingPoint {
    pub voltage: f64,
    /// Off-duty implied by the static relation at `voltage`.
    pub off_duty: f64,
    /// True when the point is genuinely discontinuous (`d2 < 1 - d1`).
    pub valid: bool,
}

/// DCM static output voltage with the source current read as the load current `v/R`.
///
/// Solves `v^2 - E v - E^2 d1^2 R / (2 L fc) = 0` for its positive root.
pub fn dcm_static_output(d1: f64, params: &BoostParams) -> Result<DcmOperatingPoint> {
    check_duty(d1)?;
    params.validate()?;
    let e = params.input_voltage;
    let k = e * e * d1 * d1 * params.resistance
        / (2.0 * params.inductance * params.switching_frequency);
    let voltage = 0.5 * (e + (e * e + 4.0 * k).sqrt());
    if voltage - e <= VOLTAGE_GUARD {
        return Ok(DcmOperatingPoint {
            voltage,
            off_duty: 1.0 - d1,
            valid: false,
        });
    }
    let off_duty = e * d1 / (voltage - e);
    Ok(DcmOperatingPoint {
        voltage,
        off_duty,
        valid: off_duty < 1.0 - d1,
    })
}

/// End state and time-averaged state over one switching period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchedPeriod {
    pub end: PlantState,
    pub mean: PlantState,
}

#[derive(Clone, Copy)]
enum Interval {
    On,
    Off,
    Idle,
}

fn interval_dynamics(interval: Interval, x: &PlantState, params: &BoostParams) -> PlantState {
    let (l, c, r, e) = (
        params.inductance,
        params.capacitance,
        params.resistance,
        params.input_voltage,
    );
    let leak = -x.v_c / (r * c);
    match interval {
        Interval::On => PlantState::new(e / l, leak),
        Interval::Off => PlantState::new((e - x.v_c) / l, x.i_l / c + leak),
        Interval::Idle => PlantState::new(0.0, leak),
    }
}

/// Advances one switching period through the on, off-conducting and idle intervals.
pub fn switched_step(
    state: &PlantState,
    params: &BoostParams,
    d1: f64,
    substeps: usize,
) -> Result<PlantState> {
    Ok(switched_period(state, params, d1, substeps)?.end)
}

/// Like [`switched_step`] but also returns the trapezoidal period average.
///
/// Each interval is integrated with RK4 at a step of about `Ts / substeps`.
/// The off-conducting interval ends early when `i_L` crosses zero; the
/// crossing is located by linear interpolation within the sub-step.
pub fn switched_period(
    state: &PlantState,
    params: &BoostParams,
    d1: f64,
    substeps: usize,
) -> Result<SwitchedPeriod> {
    check_duty(d1)?;
    params.validate()?;
    if substeps < 10 {
        return Err(Error::invalid("switched model needs at least 10 sub-steps"));
    }
    if !state.is_finite() {
        return Err(Error::NonFinite("plant state"));
    }
    let ts = params.period();
    let h_nominal = ts / substeps as f64;

    let mut x = PlantState::new(state.i_l.max(0.0), state.v_c);
    let mut area = PlantState::default();
    let mut accumulate = |a: &PlantState, b: &PlantState, dt: f64| {
        area.i_l += 0.5 * (a.i_l + b.i_l) * dt;
        area.v_c += 0.5 * (a.v_c + b.v_c) * dt;
    };

    // switch on
    let on_time = d1 * ts;
    let n_on = (on_time / h_nominal).ceil() as usize;
    for _ in 0..n_on {
        let h = on_time / n_on as f64;
        let next = rk4_step(|s, _| interval_dynamics(Interval::On, s, params), x, 0.0, h)?;
        accumulate(&x, &next, h);
        x = next;
    }

    // diode conducting until the period ends or the current reaches zero
    let mut remaining = ts - on_time;
    let n_off = (remaining / h_nominal).ceil() as usize;
    let h_off = if n_off > 0 {
        remaining / n_off as f64
    } else {
        0.0
    };
    for _ in 0..n_off {
        if x.i_l <= 0.0 && x.v_c >= params.input_voltage {
            break;
        }
        let next = raw_rk4(Interval::Off, &x, params, h_off)?;
        if next.i_l < 0.0 {
            let theta = x.i_l / (x.i_l - next.i_l);
            let crossing = PlantState::new(0.0, x.v_c + theta * (next.v_c - x.v_c));
            accumulate(&x, &crossing, theta * h_off);
            remaining -= theta * h_off;
            x = crossing;
            break;
        }
        accumulate(&x, &next, h_off);
        remaining -= h_off;
        x = next;
    }
    if remaining < 1e-15 * ts {
        remaining = 0.0;
    }

    // both devices off
    if remaining > 0.0 {
        x.i_l = 0.0;
        let n_idle = (remaining / h_nominal).ceil().max(1.0) as usize;
        let h = remaining / n_idle as f64;
        for _ in 0..n_idle {
            let next = rk4_step(
                |s, _| interval_dynamics(Interval::Idle, s, params),
                x,
                0.0,
                h,
            )?;
            accumulate(&x, &next, h);
            x = next;
        }
    }

    Ok(SwitchedPeriod {
        end: x,
        mean: PlantState::new(area.i_l / ts, area.v_c / ts),
    })
}

// RK4 without the diode clamp, so the zero crossing stays visible.
fn raw_rk4(interval: Interval, x: &PlantState, params: &BoostParams, h: f64) -> Result<PlantState> {
    let f = |s: &PlantState| interval_dynamics(interval, s, params);
    let add = |a: &PlantState, k: &PlantState, w: f64| {
        PlantState::new(a.i_l + w * k.i_l, a.v_c + w * k.v_c)
    };
    let k1 = f(x);
    let k2 = f(&add(x, &k1, 0.5 * h));
    let k3 = f(&add(x, &k2, 0.5 * h));
    let k4 = f(&add(x, &k3, h));
    let next = PlantState::new(
        x.i_l + h / 6.0 * (k1.i_l + 2.0 * k2.i_l + 2.0 * k3.i_l + k4.i_l),
        x.v_c + h / 6.0 * (k1.v_c + 2.0 * k2.v_c + 2.0 * k3.v_c + k4.v_c),
    );
    if !next.is_finite() {
        return Err(Error::Diverged { t: h });
    }
    Ok(next)
}
