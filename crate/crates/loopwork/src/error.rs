use std::path::Path;

use thiserror::Error;

/// Failures surfaced by the command-line front end, each tied to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(msg.into())
    }

    pub fn read(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("cannot read {}: {e}", path.display()))
    }

    pub fn write(path: &Path, e: std::io::Error) -> Self {
        CliError::Internal(format!("cannot write {}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<loopwork_core::Error> for CliError {
    fn from(e: loopwork_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
