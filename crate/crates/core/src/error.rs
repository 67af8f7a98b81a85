use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record could not be decoded. `line` is 1-based.
    #[error("{file}:{line}: parse error: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },

    /// A record decoded but violates a data invariant.
    #[error("{file}:{line}: {message}")]
    Validation {
        file: String,
        line: u64,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing {modality} embedding for sample `{sample_id}`")]
    MissingEmbedding { modality: String, sample_id: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: &str, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn validation(file: &str, line: u64, message: impl Into<String>) -> Self {
        Error::Validation {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }
}
