use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the command-line tool, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Numerical(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Write { .. } => 1,
            CliError::Data(_) | CliError::Read { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<comptest::Error> for CliError {
    fn from(e: comptest::Error) -> Self {
        use comptest::Error as E;
        match e {
            E::Input(_) | E::DegenerateColumn { .. } => CliError::Data(e.to_string()),
            E::Config { .. } => CliError::Config(e.to_string()),
            E::DegenerateVariance(_) | E::Numerical(_) => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
