use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] relate_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Manifest { path: PathBuf, line: usize, msg: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for anything that failed while reading or writing files, 1 for
    /// everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_io() => 2,
            CliError::Core(relate_core::Error::Parse { .. }) => 2,
            CliError::Core(_) => 1,
            CliError::Io { .. } | CliError::Manifest { .. } => 2,
            CliError::Usage(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
