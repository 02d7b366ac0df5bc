use thiserror::Error;

/// Errors raised by the numeric pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("image too small: {0}")]
    TooSmall(String),
    #[error("degenerate triangle: {0}")]
    DegenerateTriangle(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("covariance is not positive definite (pivot {pivot}); increase the ridge regularizer")]
    SingularCovariance { pivot: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("degenerate detector: {0}")]
    DegenerateDetector(String),
    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
