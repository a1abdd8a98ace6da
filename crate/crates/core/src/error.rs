use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum NluError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("non-finite value passed to {0}")]
    NumericInput(&'static str),
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("data error at line {line}: {msg}")]
    DataAt { line: usize, msg: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NluError>;
