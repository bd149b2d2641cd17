use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("validation failed: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{context}: {source}")]
    Experiment { context: String, source: mmloc::Error },
}

impl CliError {
    pub fn experiment(context: impl Into<String>) -> impl FnOnce(mmloc::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Experiment { context, source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => "ConfigError",
            CliError::Io { .. } => "IoError",
            CliError::Experiment { .. } => "ExperimentError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Experiment { .. } => 1,
            _ => 2,
        }
    }
}

/// Machine-readable error written to stderr.
#[derive(Serialize)]
pub struct ErrorRecord<'a> {
    pub schema_version: u32,
    pub status: &'static str,
    pub kind: &'static str,
    pub message: String,
    pub problems: &'a [String],
}
