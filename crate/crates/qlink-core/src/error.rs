use alloc::string::String;

/// Errors raised anywhere in the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {0} is too large for dense operators")]
    DenseTooLarge(usize),
    #[error("subsystem index {0} out of range")]
    SubsystemOutOfRange(usize),
    #[error("keep set must be non-empty and free of duplicates")]
    InvalidKeepSet,
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("time {t} ns lies outside the schedule [0, {duration}] ns")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("operation requires an adiabatic protocol")]
    NotAdiabatic,
    #[error("step size underflow at t = {t} ns (step {step} ns)")]
    StepUnderflow { t: f64, step: f64 },
    #[error("integration failed at t = {t} ns: {reason}")]
    Integration { t: f64, reason: String },
    #[error("transfer efficiency undefined: initial Q1 population is zero")]
    UndefinedEfficiency,
    #[error("matrix is singular")]
    Singular,
    #[error("incomplete tomography data: {0}")]
    IncompleteSettings(String),
    #[error("circuit model: {0}")]
    Circuit(String),
}

pub type Result<T> = core::result::Result<T, Error>;
