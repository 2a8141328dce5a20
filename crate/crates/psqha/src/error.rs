//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PsqhaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("threshold {requested:e} is below the estimated noise floor; use at least {suggested:e}")]
    BelowNoiseFloor { requested: f64, suggested: f64 },

    #[error("no sign change found: {0}")]
    NoSignChange(String),

    #[error("numerical contract violated: {0}")]
    ContractViolation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl PsqhaError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        PsqhaError::InvalidArgument(msg.into())
    }
}
