use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::PointId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate entry: {0}")]
    Duplicate(String),
    #[error("unknown point id {0}")]
    UnknownPoint(PointId),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimensionality reduction diverged at dimension {dim} (non-finite feature); try a smaller learning rate")]
    Diverged { dim: usize },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
