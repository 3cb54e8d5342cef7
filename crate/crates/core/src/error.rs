use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("framing error: {0}")]
    Framing(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported rate: {0}")]
    UnsupportedRate(String),
    #[error("channel estimation failed: {0}")]
    Estimation(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
