use thiserror::Error;

/// Errors raised by objectives, integrators and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid batch size {0}")]
    InvalidBatchSize(f64),

    #[error("batch size {batch} exceeds dataset size {dataset} for sampling without replacement")]
    BatchTooLarge { batch: usize, dataset: usize },

    #[error("gradient is undefined at the origin for a scale-invariant objective")]
    Origin,

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("covariance eigenvalue {eigenvalue:e} is below the tolerance {tolerance:e}")]
    NegativeEigenvalue { eigenvalue: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not supported: {0}")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
