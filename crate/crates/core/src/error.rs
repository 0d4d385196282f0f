use thiserror::Error;

/// Errors produced by the calibration library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid record {id}: {field}: {reason}")]
    Validation {
        id: String,
        field: String,
        reason: String,
    },

    #[error("curve set is not aligned with the dataset: {0}")]
    Alignment(String),

    #[error("covariate dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Newton iterations exhausted after {iterations} steps (gradient norm {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("censoring survival is zero for record {id} (positivity violated)")]
    PositivityViolation { id: String },

    #[error("no calibration subject selected at threshold {lambda}")]
    EmptySelection { lambda: f64 },

    #[error("evaluation time {time} lies beyond the curve grid end {grid_end}")]
    CurveRange { time: f64, grid_end: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(id: impl Into<String>, field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            id: id.into(),
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by the input data rather than numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::Alignment(_)
                | Error::DimensionMismatch { .. }
                | Error::PositivityViolation { .. }
                | Error::CurveRange { .. }
                | Error::InsufficientData(_)
                | Error::Csv(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
