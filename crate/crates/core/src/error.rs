use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the segmentation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// A shape or channel contract between two operands was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no lesion voxels in the training mask")]
    NoLesionVoxels,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A metric whose denominator is empty.
    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("could not place {requested} non-overlapping lesions after {attempts} attempts")]
    Placement { requested: usize, attempts: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
