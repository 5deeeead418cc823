use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library, grouped by category so that the
/// command-line front end can map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum QlamError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("non-finite value at timestep {timestep}: {what}")]
    NonFinite { timestep: usize, what: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error in {source_name} at byte offset {offset}: {message}")]
    Parse {
        source_name: String,
        offset: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class, used for exit codes and for asserting error kinds in tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Shape,
    Index,
    Numeric,
    Input,
    Parse,
    Io,
}

impl QlamError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            QlamError::Config(_) => ErrorKind::Config,
            QlamError::Shape(_) => ErrorKind::Shape,
            QlamError::Index(_) => ErrorKind::Index,
            QlamError::Numeric(_) | QlamError::NonFinite { .. } => ErrorKind::Numeric,
            QlamError::Input(_) => ErrorKind::Input,
            QlamError::Parse { .. } => ErrorKind::Parse,
            QlamError::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QlamError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        source_name: impl Into<String>,
        offset: u64,
        message: impl Into<String>,
    ) -> Self {
        QlamError::Parse {
            source_name: source_name.into(),
            offset,
            message: message.into(),
        }
    }
}

pub type Result<T, E = QlamError> = std::result::Result<T, E>;
