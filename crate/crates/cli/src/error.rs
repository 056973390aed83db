use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed dataset, config file or checkpoint.
    #[error("{0}")]
    Input(String),
    /// Training or solver failure after inputs were accepted.
    #[error("{0}")]
    Runtime(String),
    /// Missing, unknown or out-of-range flag values.
    #[error("{0}")]
    Flags(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Input(_) => 2,
            Self::Runtime(_) => 3,
            Self::Flags(_) => 4,
        })
    }
}

impl From<ncgc::Error> for CliError {
    fn from(e: ncgc::Error) -> Self {
        use ncgc::Error::*;
        let msg = e.to_string();
        match e {
            Ingestion { .. } | Checkpoint(_) | Io(_) => Self::Input(msg),
            Parameter(_) => Self::Flags(msg),
            Dimension { .. } | Numeric(_) | Contract(_) | Rank { .. } | Split(_) => Self::Runtime(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
