use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTEGRATION: i32 = 3;
pub const EXIT_REGRESSION: i32 = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("simulation failed: {0}")]
    Simulation(#[from] qlink_core::Error),
    #[error("{failed} of {total} sweep rows failed")]
    PartialSweep { failed: usize, total: usize },
    #[error("regression check failed: {0}")]
    Regression(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
}

impl HarnessError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Config { path: path.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        use qlink_core::Error as E;
        match self {
            HarnessError::Simulation(E::Integration { .. } | E::StepUnderflow { .. }) => EXIT_INTEGRATION,
            HarnessError::PartialSweep { .. } => EXIT_INTEGRATION,
            HarnessError::Regression(_) => EXIT_REGRESSION,
            _ => EXIT_CONFIG,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
