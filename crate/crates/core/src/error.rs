use std::path::PathBuf;

use thiserror::Error;

use crate::backend::BackendError;
use crate::geometry::ViewId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent configuration or arguments (dimension mismatch, bad ranges).
    #[error("configuration error: {0}")]
    Config(String),
    /// Invalid raster or scene contents (non-finite distances, bad headers).
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("backend error on view {view}: {source}")]
    Backend {
        view: ViewId,
        #[source]
        source: BackendError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 configuration, 3 data, 4 backend/transport.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) | Error::Capability(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            Error::Backend { .. } => 4,
        }
    }

    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Backend { source, .. } if source.is_retriable())
    }
}
