use thiserror::Error;

use crate::evaluators::EvalError;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid genome: {0}")]
    InvalidGenome(String),

    #[error("restriction for `{0}` selects no values")]
    EmptyRestriction(&'static str),

    #[error("{what} out of range: {value}")]
    Range { what: &'static str, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("random forest needs at least 2 samples, got {0}")]
    InsufficientData(usize),

    #[error("front point {point:?} does not strictly dominate reference {reference:?}")]
    PointNotDominatingRef { point: [f64; 2], reference: [f64; 2] },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("generation {0} produced no successful evaluation")]
    GenerationFailed(u32),

    #[error(transparent)]
    Evaluator(#[from] EvalError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SearchError>;
