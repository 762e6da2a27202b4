use thiserror::Error;

use crate::numerics::IntegralResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of subdivisions; `best` is the last estimate.
    #[error("quadrature did not converge ({context}): value {} +/- {}", best.value, best.error_estimate)]
    Convergence { context: String, best: IntegralResult },

    /// A fixed-point or root iteration failed to reach its tolerance.
    #[error("iteration did not converge: {0}")]
    Iteration(String),

    /// The request is well formed but names a case with no known formula (beta = 1 transients).
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no critical point: {0}")]
    NoCriticalPoint(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("singular linear system: {0}")]
    LinearSolve(String),

    #[error("calibration failed: {0}")]
    Calibration(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
