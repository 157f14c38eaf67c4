//! Conic optimization in standard form with derivatives of the solution map.
//!
//! The crate solves problems of the form
//!
//! ```text
//! minimize    c'x
//! subject to  Ax + s = b,   s in K
//! ```
//!
//! where `K` is a product of zero cones, the nonnegative orthant, and
//! second-order cones. The solver runs an operator-splitting scheme on the
//! homogeneous self-dual embedding, so the same cone projections (and their
//! Jacobians) that drive the iteration also drive [`diff`], which
//! back-propagates gradients from an optimal solution to the problem data
//! `(A, b, c)` through the implicit derivative of the embedding's residual
//! map.

pub mod cone;
pub mod diff;
mod error;
pub(crate) mod lapack;
pub mod lsqr;
pub mod problem;
mod scale;
pub mod solver;
pub mod sparse;

pub use cone::{dproject_cone, project_cone, ConeJacobian, ConeSpec};
pub use diff::{
    build_q, construct_solution, dz_residual, residual_map, vjp_solution_map,
    EmbeddingDerivativeContext, ParamGradients, SolutionGradients,
};
pub use error::ConicError;
pub use problem::{ConicProblem, ConicSolution, Residuals, SolveStatus, SolverSettings};
pub use solver::{solve, PreparedProblem, WarmStart};
pub use sparse::SparseMatrix;
