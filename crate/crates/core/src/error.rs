use thiserror::Error;

/// Errors raised by the solvers and data types in this crate.
#[derive(Debug, Error)]
pub enum WdroError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("sample row {row} lies outside the grid bounds")]
    OutOfBounds { row: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("support of {size} atoms exceeds the oracle cap of {cap}")]
    SupportTooLarge { size: usize, cap: usize },
    #[error("degenerate tilt: eps + lambda * delta = 0")]
    DegenerateTilt,
    #[error("sigma calibration failed after {0} halvings")]
    CalibrationFailed(usize),
    #[error("configuration: {0}")]
    Config(String),
    #[error("linear program: {0}")]
    Lp(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl WdroError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        WdroError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, WdroError>;
