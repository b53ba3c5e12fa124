use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RecastError>;

#[derive(Debug, Error)]
pub enum RecastError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("shape mismatch in {context}: {left:?} vs {right:?}")]
    Shape {
        context: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("codebook epoch mismatch: expected {expected}, got {actual}")]
    Epoch { expected: usize, actual: usize },

    #[error("index {index} out of range for codebook of size {k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("dataset error: {0}")]
    Data(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl RecastError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }
}
