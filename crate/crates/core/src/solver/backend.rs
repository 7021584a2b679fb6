//! LP backend interface used by the branch-and-cut loop.

use crate::error::Result;
use crate::formulation::system::{LinRow, Objective, VarDef, VarId};
use crate::scalar::Scalar;

/// Outcome of an LP solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    /// An optimal point was found.
    Optimal,
    /// The rows and bounds admit no point.
    Infeasible,
}

/// Solution of an LP relaxation.
#[derive(Clone, Debug)]
pub struct LpSolution<S> {
    /// Outcome.
    pub status: LpStatus,
    /// One value per variable (empty when infeasible).
    pub values: Vec<S>,
    /// Objective value (maximization; meaningless when infeasible).
    pub objective: S,
}

/// A linear-programming solver the branch-and-cut loop can drive: load a
/// model once, then mutate bounds (branching) and append rows (cuts)
/// between solves. Implementations re-solve from scratch; there is no
/// warm-start contract.
pub trait LpBackend<S: Scalar> {
    /// Loads variables, rows and objective, replacing any previous model.
    fn load(&mut self, vars: &[VarDef<S>], rows: &[LinRow<S>], objective: &Objective<S>);

    /// Appends one row (typically a cut) to the model.
    fn add_row(&mut self, row: LinRow<S>);

    /// Overrides the bounds of one variable.
    fn set_bounds(&mut self, var: VarId, lb: S, ub: S);

    /// Current bounds of one variable.
    fn bounds(&self, var: VarId) -> (S, S);

    /// Solves the current relaxation to optimality.
    fn solve(&mut self) -> Result<LpSolution<S>>;
}
