//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor or vector shapes do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A dataset or sample set that must be non-empty was empty.
    #[error("empty input: {0}")]
    Empty(String),

    /// A value fell outside the domain an operation accepts.
    #[error("value out of range: {0}")]
    OutOfRange(String),

    /// A bit or symbol stream had a length the codec cannot handle.
    #[error("malformed length: {0}")]
    MalformedLength(String),

    /// Experiment configuration is inconsistent or incomplete.
    #[error("config error: {0}")]
    Config(String),

    /// Dataset ingestion failed.
    #[error("data error: {0}")]
    Data(String),

    /// A loss or gradient became NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A checkpoint or archive could not be decoded.
    #[error("corrupt or incompatible file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
