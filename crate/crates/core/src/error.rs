use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite {0}")]
    NonFinite(&'static str),

    /// The integrator produced a non-finite derivative or state.
    #[error("simulation diverged at t = {t} s")]
    Diverged { t: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown preset `{0}` (expected fig2, fig3, fig4 or fig5)")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
