use thiserror::Error;

use crate::dispatch::DispatchTrace;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("component {0} has zero variance")]
    DegenerateComponent(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("window error: {0}")]
    Window(String),
    #[error("regressor cross-product is singular")]
    RankDeficient,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("model is unstable (companion spectral radius {0:.6} >= 1)")]
    UnstableModel(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid network case: {0}")]
    Case(String),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("iteration limit reached (best KKT residual {0:.3e})")]
    IterationLimit(f64),
    #[error("invalid state: {0}")]
    State(String),
    #[error("dispatch infeasible at period {period}")]
    PeriodInfeasible {
        period: usize,
        partial: Box<DispatchTrace>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
