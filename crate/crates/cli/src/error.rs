use std::path::PathBuf;

use audit_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{stage}: required input {} is missing; run `audit {producer}` first", path.display())]
    MissingInput {
        stage: &'static str,
        producer: &'static str,
        path: PathBuf,
    },
    #[error("{}: changed since `audit {producer}` recorded it; rerun that stage", path.display())]
    StaleInput { producer: &'static str, path: PathBuf },
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{0}")]
    Stage(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "USAGE",
            CliError::Config(_) => "INVALID_CONFIG",
            CliError::MissingInput { .. } => "MISSING_INPUT",
            CliError::StaleInput { .. } => "STALE_INPUT",
            CliError::Core(e) => e.code(),
            CliError::Stage(_) => "STAGE_FAILED",
        }
    }

    /// 1 for usage and configuration problems, 2 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            _ => 2,
        }
    }
}
