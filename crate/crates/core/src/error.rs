use thiserror::Error;

/// Errors produced by dataset construction, model handling and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset contains no points")]
    EmptyDataset,
    #[error("point {index} has a non-finite {axis} coordinate")]
    NonFinite { index: usize, axis: char },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid merge: {0}")]
    InvalidMerge(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
