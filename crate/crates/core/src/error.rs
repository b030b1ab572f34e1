use thiserror::Error;

/// Errors raised by the geometry primitives and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid prox setup: {0}")]
    InvalidSetup(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unbounded set")]
    UnboundedSet,

    #[error("empty feasible set: {0}")]
    EmptySet(String),

    #[error("point is not in the feasible set (violation {violation:e})")]
    Infeasible { violation: f64 },

    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e})")]
    InnerSolver { iterations: usize, residual: f64 },

    #[error("iteration {iteration}: parameter doubling exceeded the cap (L = {l:e})")]
    DoublingCap { iteration: usize, l: f64 },

    #[error("budget exhausted after {iterations} iterations: {detail}")]
    BudgetExhausted { iterations: usize, detail: String },

    #[error("unsupported structure: {0}")]
    Unsupported(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
