use thiserror::Error;

use crate::dynamics::Sample;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration; `path` is the dotted key of the offending field.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("non-finite entry in the product matrix at t = {t}")]
    StateCorruption { t: f64 },

    #[error("linear solver breakdown at t = {t}: pivot {pivot:e} below threshold {threshold:e}")]
    SolverBreakdown { t: f64, pivot: f64, threshold: f64 },

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e} at t = {t}")]
    Accuracy {
        t: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("norm drift {drift:e} exceeds tolerance {tolerance:e} at t = {t}")]
    NormDrift { t: f64, drift: f64, tolerance: f64 },

    /// A trajectory stopped early; carries the last sample that passed all checks.
    #[error("evolution aborted after t = {}: {source}", last_good.t)]
    Aborted {
        #[source]
        source: Box<Error>,
        last_good: Box<Sample>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical integration itself (as opposed to
    /// bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::StateCorruption { .. }
            | Error::SolverBreakdown { .. }
            | Error::Accuracy { .. }
            | Error::NormDrift { .. } => true,
            Error::Aborted { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
