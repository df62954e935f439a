//! Sampled-data intelligent PI controller.
//!
//! The controller assumes the second-order ultra-local model
//! `y'' = F + alpha * u` and closes the loop with
//! `u = -[F]/alpha + y*''/alpha + Kp*e + Ki*∫e`, where `[F]` is re-estimated
//! every sample from finite differences. Substituting
//! `[F] = [y''] - alpha * u_{k-1}` gives the velocity-form law
//!
//! ```text
//! u_k = u_{k-1} - ((y_{k-1} - 2 y_{k-2} + y_{k-3}) - (y*_{k-1} - 2 y*_{k-2} + y*_{k-3})) / (alpha * tc^2)
//!       + Kp * e_{k-1} + Ki * I_{k-1}
//! ```
//!
//! with `e = y* - y` and `I` the rectangular-rule integral of `e`.

use std::collections::VecDeque;

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpiConfig {
    /// Non-physical scaling between the input and the output's second derivative.
    pub alpha: f64,
    pub kp: f64,
    /// Integral gain in 1/s.
    pub ki: f64,
    /// Sampling period in seconds.
    pub tc: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Moving-average window over raw output samples; 0 disables filtering.
    pub filter_window: usize,
}

impl Default for IpiConfig {
    fn default() -> Self {
        Self {
            alpha: 30.0,
            kp: 2.0,
            ki: 10.0,
            tc: 1e-4,
            u_min: 0.01,
            u_max: 0.95,
            filter_window: 0,
        }
    }
}

impl IpiConfig {
    pub fn validate(&self) -> Result<()> {
        for (value, what) in [
            (self.alpha, "alpha"),
            (self.kp, "kp"),
            (self.ki, "ki"),
            (self.tc, "tc"),
            (self.u_min, "u_min"),
            (self.u_max, "u_max"),
        ] {
            ensure_finite(value, what)?;
        }
        if self.alpha == 0.0 {
            return Err(Error::invalid("alpha must be nonzero"));
        }
        if self.tc <= 0.0 {
            return Err(Error::invalid("tc must be positive"));
        }
        if !(0.0 <= self.u_min && self.u_min < self.u_max && self.u_max <= 1.0) {
            return Err(Error::invalid(
                "duty clamps must satisfy 0 <= u_min < u_max <= 1",
            ));
        }
        if self.kp < 0.0 {
            return Err(Error::invalid("kp must be non-negative"));
        }
        if self.ki < 0.0 {
            return Err(Error::invalid("ki must be non-negative"));
        }
        Ok(())
    }

    fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.u_min, self.u_max)
    }
}

/// Mean of the newest `min(window, len)` samples of `samples` (oldest first).
///
/// `window == 0` means filtering is disabled and yields `None`, as does an
/// empty buffer.
pub fn moving_average(samples: &[f64], window: usize) -> Option<f64> {
    if window == 0 || samples.is_empty() {
        return None;
    }
    let n = window.min(samples.len());
    let tail = &samples[samples.len() - n..];
    Some(tail.iter().sum::<f64>() / n as f64)
}

/// Controller memory between samples.
///
/// Histories are stored newest first: `y_hist[0]` is `y_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    y_hist: [f64; 3],
    yref_hist: [f64; 3],
    integral: f64,
    u_prev: f64,
    raw_hist: VecDeque<f64>,
}

impl ControllerState {
    /// Floods both histories with the initial values so the first step sees
    /// zero second differences.
    pub fn new(config: &IpiConfig, y0: f64, yref0: f64, u0: f64) -> Result<Self> {
        Self::from_history(config, [y0; 3], [yref0; 3], 0.0, u0)
    }

    /// Builds a state from explicit histories (newest first).
    pub fn from_history(
        config: &IpiConfig,
        y_hist: [f64; 3],
        yref_hist: [f64; 3],
        integral: f64,
        u_prev: f64,
    ) -> Result<Self> {
        config.validate()?;
        if y_hist.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("output history"));
        }
        if yref_hist.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reference history"));
        }
        ensure_finite(integral, "integral")?;
        ensure_finite(u_prev, "initial duty")?;
        if u_prev < config.u_min || u_prev > config.u_max {
            return Err(Error::invalid(format!(
                "initial duty {u_prev} outside [{}, {}]",
                config.u_min, config.u_max
            )));
        }
        Ok(Self {
            y_hist,
            yref_hist,
            integral,
            u_prev,
            raw_hist: VecDeque::with_capacity(config.filter_window),
        })
    }

    pub fn y_hist(&self) -> [f64; 3] {
        self.y_hist
    }

    pub fn yref_hist(&self) -> [f64; 3] {
        self.yref_hist
    }

    /// Accumulated tracking-error integral in V·s.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn u_prev(&self) -> f64 {
        self.u_prev
    }

    /// Passes a raw measurement through the moving-average filter, or returns
    /// it unchanged when filtering is disabled.
    pub fn filter(&mut self, config: &IpiConfig, raw: f64) -> Result<f64> {
        ensure_finite(raw, "measurement")?;
        if config.filter_window == 0 {
            return Ok(raw);
        }
        if self.raw_hist.len() == config.filter_window {
            self.raw_hist.pop_front();
        }
        self.raw_hist.push_back(raw);
        let samples = self.raw_hist.make_contiguous();
        Ok(moving_average(samples, config.filter_window).unwrap_or(raw))
    }

    /// One sample of the discrete i-PI law. Returns the clamped duty.
    pub fn step(&mut self, config: &IpiConfig, y: f64, y_ref: f64) -> Result<f64> {
        Ok(self.step_detailed(config, y, y_ref)?.duty)
    }

    /// Like [`step`](Self::step), also reporting the law's value before clamping.
    pub fn step_detailed(
        &mut self,
        config: &IpiConfig,
        y: f64,
        y_ref: f64,
    ) -> Result<ControlOutput> {
        ensure_finite(y, "output")?;
        ensure_finite(y_ref, "reference")?;

        push(&mut self.y_hist, y);
        push(&mut self.yref_hist, y_ref);

        let ddy = second_difference(&self.y_hist);
        let ddy_ref = second_difference(&self.yref_hist);
        let err = y_ref - y;

        let integral_before = self.integral;
        self.integral += err * config.tc;

        let unclamped = self.u_prev - (ddy - ddy_ref) / (config.alpha * config.tc * config.tc)
            + config.kp * err
            + config.ki * self.integral;
        if unclamped.is_nan() {
            self.integral = integral_before;
            return Err(Error::NonFinite("control output"));
        }
        let duty = config.clamp(unclamped);

        // conditional integration: freeze while saturated in the error's direction
        let winding_up =
            (unclamped > config.u_max && err > 0.0) || (unclamped < config.u_min && err < 0.0);
        if winding_up {
            self.integral = integral_before;
        }

        self.u_prev = duty;
        Ok(ControlOutput {
            duty,
            unclamped,
            integrating: !winding_up,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Duty after clamping.
    pub duty: f64,
    pub unclamped: f64,
    /// False when anti-windup reverted this step's integral update.
    pub integrating: bool,
}

fn push(hist: &mut [f64; 3], value: f64) {
    hist[2] = hist[1];
    hist[1] = hist[0];
    hist[0] = value;
}

fn second_difference(hist: &[f64; 3]) -> f64 {
    hist[0] - 2.0 * hist[1] + hist[2]
}
