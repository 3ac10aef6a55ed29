use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("sigma estimator undefined: beta = {beta} must be below d/kappa = {limit}")]
    SigmaEstimatorUndefined { beta: f64, limit: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite loss at batch {batch_index}")]
    NonFiniteLoss { batch_index: usize },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
