use std::process::ExitCode;

use ssp_core::CoreError;
use ssp_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, missing or malformed inputs, mismatched checkpoints.
    #[error("{0}")]
    User(String),
    /// Numerical failures and broken invariants.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::User(_) => ExitCode::from(1),
            CliError::Internal(_) => ExitCode::from(2),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Nn(n) => n.into(),
            other => CliError::User(other.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        CliError::Internal(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn user(msg: impl Into<String>) -> CliError {
    CliError::User(msg.into())
}
