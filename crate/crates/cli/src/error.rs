use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] cavity::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("tolerance band violated: {0}")]
    Band(String),

    #[error("{failed} of {total} sweep rows failed")]
    PartialSweep { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(cavity::Error::InvalidConfig(_) | cavity::Error::Parse(_) | cavity::Error::OffGridStop { .. }) => 2,
            CliError::Band(_) => 3,
            CliError::PartialSweep { .. } => 4,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
