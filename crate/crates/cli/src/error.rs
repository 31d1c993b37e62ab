use std::process::ExitCode;

use thiserror::Error;

/// Failures that map onto distinct process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configs or inputs. Nothing has been executed.
    #[error("invalid input: {0}")]
    Validation(String),
    /// Outputs were written but at least one frontier point is not a proven
    /// optimum and certification was required.
    #[error("{0}")]
    Uncertified(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(2),
            CliError::Uncertified(_) => ExitCode::from(3),
            CliError::Other(_) => ExitCode::from(1),
        }
    }
}

impl From<ccwm_core::Error> for CliError {
    fn from(e: ccwm_core::Error) -> Self {
        use ccwm_core::Error as E;
        match e {
            E::SolverBug(_) | E::Lp(_) => CliError::Other(e.into()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub type CliResult<T> = Result<T, CliError>;
