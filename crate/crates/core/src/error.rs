use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric value {value:?} in column `{column}` at data row {row}")]
    NonNumeric { column: String, row: usize, value: String },
    #[error("non-binary label {value:?} at data row {row}")]
    NonBinaryLabel { row: usize, value: String },
    #[error("invalid period value {value:?} at data row {row}")]
    InvalidPeriod { row: usize, value: String },
    #[error("empty period {0}")]
    EmptyPeriod(usize),
    #[error("single-class data: {0}")]
    SingleClass(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("non-finite feature value")]
    NonFinite,
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("ensemble kind mismatch: expected {expected}, got {actual}")]
    KindMismatch {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("ensemble has no members")]
    EmptyEnsemble,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
