use thiserror::Error;

/// Errors produced anywhere in the adaptation stack.
#[derive(Debug, Error)]
pub enum PrdaError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("training labels contain a single class ({0}); at least two are required")]
    SingleClass(usize),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PrdaError>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PrdaError::Shape(msg.into()))
}
