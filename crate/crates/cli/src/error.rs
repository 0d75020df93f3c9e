use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] dheac::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(dheac::Error::ResourceShortage { .. }) => 3,
            CliError::Core(dheac::Error::InvariantViolation(_)) => 4,
            CliError::Core(_) => 2,
            CliError::Verification(_) => 4,
            CliError::Io { .. } => 5,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
