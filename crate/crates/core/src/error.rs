use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed AVT1 data: {0}")]
    Format(String),

    #[error("run-length mask: {0}")]
    Rle(String),

    #[error("degenerate word span {word:?} [{onset_ms} ms, {offset_ms} ms): no frames inside the utterance")]
    DegenerateSpan {
        word: String,
        onset_ms: f64,
        offset_ms: f64,
    },

    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no data: {0}")]
    Empty(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{} sample(s) failed:\n  {}", .0.len(), .0.join("\n  "))]
    Batch(Vec<String>),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
