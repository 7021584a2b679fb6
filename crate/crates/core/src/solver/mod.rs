//! Solvers: exact revenue evaluation, a dense bounded-variable simplex, and
//! a branch-and-cut loop that separates tangent-plane cuts lazily.

pub mod backend;
pub mod bnc;
pub mod qeval;
pub mod result;
pub mod simplex;

pub use backend::{LpBackend, LpSolution, LpStatus};
pub use bnc::{branch_and_cut, SolveOptions};
pub use qeval::QEvaluator;
pub use result::{BuildPlan, PlanEntry, SolveResult, SolveStatus};
pub use simplex::DenseSimplex;
