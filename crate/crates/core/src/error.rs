use std::path::PathBuf;

use crate::pcg::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose by {diff:e}")]
    Symmetry { row: usize, col: usize, diff: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at row {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("incomplete Cholesky failed after diagonal shifts up to {last_shift}")]
    FactorizationFailed { last_shift: f64 },

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    Convergence { sweeps: usize },

    #[error("singular triangular factor: zero diagonal at row {index}")]
    Singular { index: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rank error: r = {rank} is not below n = {n}")]
    Rank { rank: usize, n: usize },

    #[error("not SPD: {0}")]
    NotSpd(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("PCG breakdown at iteration {iteration}: p^T A p = {curvature:e}")]
    Breakdown {
        iteration: usize,
        curvature: f64,
        report: Box<SolveReport>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Errors caused by bad user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Io { .. } | Error::Schema(_) | Error::Symmetry { .. }
        )
    }
}
