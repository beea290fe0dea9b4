use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unstable trap at site {site}: k0 + sum(k_ij) = {stiffness:e} N/m < 0")]
    UnstableTrap { site: usize, stiffness: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("integration became unstable at step {step} (t = {time:e}): {reason}")]
    Unstable {
        step: usize,
        time: f64,
        reason: String,
    },

    #[error("energy {delta} is outside the propagating band [{lower}, {upper}]")]
    OutsideBand { delta: f64, lower: f64, upper: f64 },

    #[error("singular scattering system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Unstable { .. } | Error::Singular { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
