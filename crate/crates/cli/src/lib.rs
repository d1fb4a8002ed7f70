//! Library half of the `wdro` command-line tool: config parsing, command
//! implementations and artifact writers.

pub mod config;
pub mod report;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;
use wdro::WdroError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] WdroError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("diagnostics failed: {0}")]
    Diagnostics(String),
}

impl CliError {
    /// `1` for numerical failures, `2` for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Diagnostics(_) => 1,
            CliError::Solver(e) => match e {
                WdroError::Infeasible(_)
                | WdroError::CalibrationFailed(_)
                | WdroError::Lp(_)
                | WdroError::DegenerateTilt
                | WdroError::SupportTooLarge { .. } => 1,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
