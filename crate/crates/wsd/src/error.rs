use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("model file format error: {0}")]
    Format(String),

    #[error("answer key error: {0}")]
    Key(String),

    #[error("index {index} out of range (size {size})")]
    Index { index: usize, size: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("state error: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
