//! Command-line front end for block-row recursive least-squares migration.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

pub mod commands;
pub mod config;

use std::process::ExitCode;

pub use commands::{run, Cli, Command};
pub use config::{DotTestTarget, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] brls_core::Error),
    #[error("dot test failed: worst relative error {worst:e} exceeds {tolerance:e}")]
    DotTestFailed { worst: f64, tolerance: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Core(e) if e.is_numerical() => ExitCode::from(2),
            CliError::DotTestFailed { .. } => ExitCode::from(2),
            _ => ExitCode::from(1),
        }
    }
}
