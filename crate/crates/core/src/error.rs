use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
///
/// [`Error::Io`] is the only variant that maps to an I/O failure on the
/// command line; every other variant is a validation failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("invalid value at row {row}: {message}")]
    Value { row: usize, message: String },

    #[error("label {label} at row {row} is out of range for {n_classes} classes")]
    Label {
        row: usize,
        label: i64,
        n_classes: usize,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("entropy undefined: {0}")]
    EntropyUndefined(String),

    #[error("correlation undefined: {0}")]
    CorrelationUndefined(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True when the error came from the filesystem rather than from the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
