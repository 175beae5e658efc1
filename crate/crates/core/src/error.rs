use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch for `{name}`: expected {expected}, got {got}")]
    DimensionMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("user fractions infeasible: total load {load} exceeds the limit {limit}")]
    InfeasibleLoad { load: f64, limit: f64 },

    #[error("cluster {index} is empty or out of range")]
    EmptyCluster { index: usize },

    #[error("problem is not circulant-symmetric")]
    NotSymmetric,

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "per-BS dual iteration did not converge after {iterations} iterations \
         (max violation {violation:e}); best feasible objective {best_objective}"
    )]
    DualNotConverged {
        iterations: usize,
        violation: f64,
        best_objective: f64,
        best_q: Vec<f64>,
    },

    #[error("linear system is singular ({context}); pivot ratio {pivot_ratio:e}")]
    Singular {
        context: &'static str,
        pivot_ratio: f64,
    },

    #[error("channel matrix is rank deficient: {rows}x{cols}, {detail}")]
    RankDeficient {
        rows: usize,
        cols: usize,
        detail: String,
    },

    #[error("zero average rate for group {group}; warm-start the scheduler before computing weights")]
    ZeroRate { group: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_len(name: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            name,
            expected,
            got,
        })
    }
}
