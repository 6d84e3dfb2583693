use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::npy::NpyError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// Flags that cannot describe a valid run.
    #[error("usage: {0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    /// Well-formed flags applied to data that violates a contract.
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: NpyError },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Validation(_) | CliError::Format { .. } => EXIT_VALIDATION,
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn usage(err: impl ToString) -> Self {
        CliError::Usage(err.to_string())
    }

    pub(crate) fn invalid(err: impl ToString) -> Self {
        CliError::Validation(err.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
