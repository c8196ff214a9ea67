//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by operators, solvers, calculators and checkers.
#[derive(Debug, Error)]
pub enum KlabError {
    /// A required registered derivative is missing.
    #[error("insufficient derivative data: missing {symbol}")]
    MissingDerivative { symbol: String },

    /// An argument is outside the domain of a formula or operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A grid is too coarse for the requested stencil.
    #[error("grid too coarse: need at least {required} points per axis, got {actual}")]
    GridTooCoarse { required: usize, actual: usize },

    /// Only d = 1 and d = 2 are supported by the grid machinery.
    #[error("unsupported spatial dimension {0} (numerical paths support d = 1, 2)")]
    UnsupportedDimension(usize),

    /// A time stepper produced a non-finite value.
    #[error("solver aborted: non-finite value at t = {t}")]
    Blowup { t: f64 },

    /// The admissible interval for a minimisation parameter is empty.
    #[error("empty admissible interval: {0}")]
    EmptyInterval(String),

    /// Tight-measure construction could not resolve a forgetting limit.
    #[error("tight system not resolved: {0}")]
    MeasureNotResolved(String),

    /// The dissipativity precondition for a tight family fails.
    #[error("tight system not guaranteed: {0}")]
    NotDissipative(String),

    /// Scenario or coefficient files that fail to parse.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Invalid(String),
}

impl From<serde_json::Error> for KlabError {
    fn from(e: serde_json::Error) -> Self {
        KlabError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KlabError>;
