use crate::problem::SolveStatus;

/// Errors raised by problem construction, the solver, and the derivative
/// machinery.
#[derive(Debug, thiserror::Error)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("degenerate embedding point: omega = {0}")]
    DegenerateEmbedding(f64),
    #[error("operation requires an optimal solution, got {0:?}")]
    NotOptimal(SolveStatus),
    #[error("ill-conditioned derivative system: {0}")]
    IllConditioned(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}
