//! Command-line front end and file formats for the `achedge-core` library:
//! JSON configs in, reproducible reports/CSV/JSON out.

pub mod battery;
pub mod config;
pub mod csvout;
pub mod sweep;

use thiserror::Error;

/// CLI-level errors, split by exit status: configuration problems exit
/// with 2, runtime/check failures with 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<achedge_core::Error> for CliError {
    fn from(e: achedge_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io error: {e}"))
    }
}
