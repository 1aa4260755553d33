use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("duplicate question at row {row}: {question:?}")]
    DuplicateQuestion { row: usize, question: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A downstream stage received data that an upstream contract should
    /// have ruled out.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("embedding provider failed on a batch of {} inputs: {message}", batch.len())]
    Embedding { batch: Vec<String>, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<Path>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Io { path, source }
    }

    /// Whether retrying the same request could succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Embedding { .. })
    }
}
