use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("neighbor count {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("detector already stopped at t={0}; reset before further updates")]
    AlreadyStopped(u64),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("calibration target unreachable within threshold range [{lo}, {hi}]: {reason}")]
    TargetUnreachable { lo: f64, hi: f64, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
