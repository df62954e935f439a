use crate::error::{ensure_finite, Error, Result};

/// Output reference trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceSpec {
    Constant {
        level: f64,
    },
    /// First-order approach `vf + (v0 - vf) exp(-t / tau)`.
    Exponential {
        v0: f64,
        vf: f64,
        tau: f64,
    },
}

impl ReferenceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReferenceSpec::Constant { level } => ensure_finite(level, "reference level"),
            ReferenceSpec::Exponential { v0, vf, tau } => {
                ensure_finite(v0, "reference v0")?;
                ensure_finite(vf, "reference vf")?;
                ensure_finite(tau, "reference tau")?;
                if tau <= 0.0 {
                    return Err(Error::invalid("tau must be positive"));
                }
                Ok(())
            }
        }
    }

    /// Largest value the trajectory takes for t >= 0.
    pub fn peak(&self) -> f64 {
        match *self {
            ReferenceSpec::Constant { level } => level,
            ReferenceSpec::Exponential { v0, vf, .. } => v0.max(vf),
        }
    }
}

pub fn reference_at(spec: &ReferenceSpec, t: f64) -> f64 {
    match *spec {
        ReferenceSpec::Constant { level } => level,
        ReferenceSpec::Exponential { v0, vf, tau } => vf + (v0 - vf) * (-t / tau).exp(),
    }
}
