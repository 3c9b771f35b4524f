//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading data, building configurations or running the controller.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("timestamps are not uniformly spaced: step {index} is {found} h, expected {expected} h")]
    NonUniformSpacing {
        index: usize,
        expected: f64,
        found: f64,
    },
    #[error("forecast request [{start} h, {end} h) is outside the available data [0 h, {available} h)")]
    OutOfRange { start: f64, end: f64, available: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("evaluation budget {budget} is smaller than the population size {pop_size}")]
    BudgetTooSmall { budget: usize, pop_size: usize },
    #[error("cannot train a model on an empty dataset")]
    EmptyDataset,
    #[error("metric is undefined on an empty event set")]
    EmptyEventSet,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
