use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} channel(s), found {found}")]
    ChannelMismatch { expected: &'static str, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("occlusion did not converge: requested {requested}%, achieved {achieved:.3}%")]
    Convergence { requested: f64, achieved: f64 },

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("classifier failed on item {index}: {reason}")]
    Classifier { index: usize, reason: String },

    #[error("no successful sweep points")]
    NoSuccessfulPoints,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
