//! Command-line front end: run configuration, subcommands and result files.

pub mod commands;
pub mod config;
pub mod gradcheck;
pub mod output;

use std::path::Path;

pub use commands::{run, Outcome, EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_VIOLATION};
pub use config::{parse_classes, Command, RunConfig, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] mather_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Non-convergence maps to 3, everything else to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(mather_core::Error::NotConverged { .. }) => EXIT_INCONCLUSIVE,
            _ => EXIT_CONFIG,
        }
    }
}
