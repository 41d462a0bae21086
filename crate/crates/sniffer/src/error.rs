use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] csi_core::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("configuration {0:?} not found")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("broker unavailable: {0}")]
    Unavailable(String),
    #[error("timed out waiting for the collector")]
    Timeout,
    #[error("collector error: {0}")]
    Collector(String),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Self::Parse { line, message: message.into() }
    }

    pub fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::File { path: path.into(), source }
    }

    /// Bad input as opposed to a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Self::Core(_) | Self::Parse { .. } | Self::Json(_) | Self::InvalidConfig(_) | Self::NotFound(_) | Self::Conflict(_)
        )
    }
}
