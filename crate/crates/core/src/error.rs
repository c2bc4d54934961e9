use thiserror::Error;

use crate::realization::ReductionTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("{context}: non-finite entry at ({row}, {col})")]
    NonFinite {
        context: &'static str,
        row: usize,
        col: usize,
    },

    #[error("{context}: dimension mismatch, expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,

    #[error("empty column space: matrix has numerical rank zero")]
    EmptyColumnSpace,

    #[error("system has no reachable subspace (controllability matrix has rank zero)")]
    NoReachableSubspace,

    #[error("system has no observable subspace (observability matrix has rank zero)")]
    NoObservableSubspace,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("series too short: need {needed} samples, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("integration produced a non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("reduction did not converge within {limit} iterations")]
    ReductionDidNotConverge { limit: usize, trace: ReductionTrace },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Malformed(_) | Error::Json(_)
        )
    }
}
