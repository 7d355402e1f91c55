use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("attack initialization failed")]
    AttackInit,

    #[error("degenerate embedding")]
    DegenerateEmbedding,

    #[error("{module}: contract violation: {msg}")]
    Contract { module: &'static str, msg: String },
}

impl Error {
    pub(crate) fn contract(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Contract {
            module,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attributes an error to the pipeline stage it came from. I/O errors and
    /// errors already attributed pass through unchanged.
    pub fn within(self, module: &'static str) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::Contract { .. }) => e,
            e => Error::contract(module, e.to_string()),
        }
    }

    /// True for errors caused by the filesystem rather than by inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
