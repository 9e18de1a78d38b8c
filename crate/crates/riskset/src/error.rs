//! Error type shared across the crate.

use thiserror::Error;

/// Errors surfaced by constructors and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data fails a structural invariant (bad probabilities, malformed
    /// polyhedron, slopes out of order, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A documented precondition of an operation does not hold (for example
    /// a threshold outside the interior of the loss range).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Two objects that must live on the same space or share a dimension do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A feasibility problem has no solution.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An iterative solver exhausted its budget without meeting its tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A combination of options that the crate deliberately does not support.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
