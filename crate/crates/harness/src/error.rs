use std::path::PathBuf;

use thiserror::Error;

/// Failures split by the process exit code they map to.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration; exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Training produced a non-finite value. Metrics written so far stay on
    /// disk at `metrics`.
    #[error("run diverged at step {step}: {reason} (partial metrics in {})", metrics.display())]
    Diverged { step: u64, reason: String, metrics: PathBuf },
    #[error(transparent)]
    Core(#[from] distcritic_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;
