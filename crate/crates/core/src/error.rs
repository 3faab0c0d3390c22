use thiserror::Error;

/// Errors raised by design construction, surrogate fitting and the sequential engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmddError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("degenerate distance: {0}")]
    DegenerateDistance(String),
    #[error("output column {column} is constant")]
    DegenerateOutputDimension { column: usize },
    #[error("correlation matrix is ill-conditioned even with jitter {jitter:e}")]
    IllConditioned { jitter: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("candidate pool is exhausted")]
    ExhaustedCandidates,
    #[error("design already has the requested {0} runs")]
    Finished(usize),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, SmddError>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> SmddError {
    SmddError::InvalidArgument(msg.into())
}
