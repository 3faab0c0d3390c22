use smdd::SmddError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("corrupt state file: {0}")]
    CorruptState(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Runtime(_) => 1,
            Self::Usage(_) => 2,
            Self::CorruptState(_) => 3,
            Self::Protocol(_) => 4,
        }
    }
}

impl From<SmddError> for CliError {
    fn from(e: SmddError) -> Self {
        match e {
            SmddError::InvalidArgument(_) => Self::Usage(e.to_string()),
            SmddError::ProtocolViolation(m) => Self::Protocol(m),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Usage(format!("csv: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
