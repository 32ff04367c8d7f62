//! Library side of the `tensorstat` command-line tool.
//!
//! Exit codes: 0 success, 1 failed verification check, 2 malformed input or
//! arguments, 3 mathematical precondition failure (singular, not positive
//! definite, degenerate variance).

pub mod commands;
pub mod format;
pub mod io;
pub mod params;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Math(tensorstat::Error),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Input(_) => 2,
            CliError::Math(_) => 3,
        }
    }
}

impl From<tensorstat::Error> for CliError {
    fn from(e: tensorstat::Error) -> Self {
        if e.is_math_precondition() {
            CliError::Math(e)
        } else {
            CliError::Input(e.to_string())
        }
    }
}
