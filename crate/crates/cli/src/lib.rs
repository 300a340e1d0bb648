//! Experiment harness for the level-set reconstruction toolkit: phantom
//! generation, calibrated noise injection, config files, CSV/JSON artifacts
//! and the self-check battery behind the `lsr` command line.

pub mod check;
pub mod config;
pub mod experiment;
pub mod io;
pub mod noise;
pub mod phantom;

use std::process::ExitCode;

/// Harness-level failures, grouped by exit-code category.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("run: {0}")]
    Run(#[from] lsr_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("io: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Run(_) => ExitCode::from(3),
            CliError::Io(_) | CliError::Json(_) => ExitCode::from(4),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
