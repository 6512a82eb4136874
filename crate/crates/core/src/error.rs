use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum BtflError {
    /// An argument fell outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Adaptive refinement exhausted its panel budget before meeting the tolerance.
    #[error("integration did not converge: last difference {last_diff:e} with {panels} panels (tolerance {abs_tol:e})")]
    Integration {
        last_diff: f64,
        panels: usize,
        abs_tol: f64,
    },

    /// Training produced a non-finite loss.
    #[error("training diverged (loss {loss}) with {parameter} = {value}")]
    Divergence {
        loss: f64,
        parameter: &'static str,
        value: f64,
    },

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("incomplete results: {0}")]
    IncompleteGrid(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BtflError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        BtflError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for this error class: 2 config, 3 numeric, 4 incomplete inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            BtflError::Config { .. } | BtflError::Parse(_) => 2,
            BtflError::Domain(_)
            | BtflError::DimensionMismatch { .. }
            | BtflError::Integration { .. }
            | BtflError::Divergence { .. } => 3,
            BtflError::EmptyInput(_)
            | BtflError::IncompleteGrid(_)
            | BtflError::MissingInput(_)
            | BtflError::Io(_)
            | BtflError::Json(_)
            | BtflError::Csv(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, BtflError>;
