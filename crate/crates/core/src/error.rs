use thiserror::Error;

use crate::nnls::NnlsSolution;
use crate::report::SolverReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix with {columns} columns is rank deficient (pivot {pivot:.3e} below {threshold:.3e})")]
    RankDeficient { columns: usize, pivot: f64, threshold: f64 },

    #[error("dual point is infeasible: max |A^T p| exceeds 1 by {violation:.3e}")]
    Domain { violation: f64 },

    #[error("NNLS did not converge within {iterations} iterations")]
    NnlsNonConvergence { iterations: usize, best: Box<NnlsSolution> },

    #[error("solver did not converge within {iterations} outer iterations")]
    NonConvergence { iterations: usize, report: Box<SolverReport> },

    #[error("basis pursuit is infeasible: the trajectory drifts to infinity (|d| = {descent_norm:.3e})")]
    InfeasibleBp { descent_norm: f64 },

    #[error("solution path stalled at t = {t:.17e} after {breakpoints} breakpoints (NNLS subproblem active set size {active})")]
    PathStall { t: f64, breakpoints: usize, active: usize },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("instance too large for exhaustive enumeration: n = {n} exceeds {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("failed at grid index {index}: {source}")]
    AtGridIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
