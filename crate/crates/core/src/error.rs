use thiserror::Error;

/// Errors produced by operator construction, geometry, and trajectory handling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("numeric precision: {0}")]
    Precision(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("timestamps must be strictly increasing (entry {index})")]
    Ordering { index: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
