use thiserror::Error;

/// Errors raised by set, cone and estimator operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("point is not in the set (distance {distance:.3e})")]
    NotInSet { distance: f64 },

    #[error("projection not found after {iterations} iterations")]
    ProjectionNotFound { iterations: usize, last: Vec<f64> },

    #[error("jacobian has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("insufficient samples (count {count})")]
    InsufficientSamples { count: usize },

    #[error("degenerate scenario: {0}")]
    Degenerate(String),

    #[error("no information: {0}")]
    NoInformation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient trace: {usable} usable points")]
    InsufficientTrace { usable: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, RegError>;
