//! Solve outcomes: terminal status, bounds, and the extracted build plan.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulation::system::ConstraintSystem;
use crate::scalar::{real, Scalar};

/// Terminal state of a branch-and-cut run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Proven optimal within the absolute gap.
    Optimal,
    /// No feasible plan exists.
    Infeasible,
    /// Stopped at the node budget with the gap still open.
    NodeLimit,
    /// Stopped at the time budget with the gap still open.
    TimeLimit,
}

/// The open options at one decision point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PlanEntry {
    /// Year the entry covers (1-based).
    pub stage: usize,
    /// Scenario-tree node the decision is conditioned on; `None` for plans
    /// with one unconditional decision per year.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_node: Option<usize>,
    /// Open options, ascending.
    pub open: Vec<usize>,
}

/// A full plan: which options are open at every decision point.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BuildPlan {
    /// Entries ordered by year, then by tree node.
    pub entries: Vec<PlanEntry>,
}

impl BuildPlan {
    /// Extracts the plan a solution point encodes. Decision copies that are
    /// constrained to agree (scenario-form models) are merged into one entry
    /// per (year, tree node); copies that disagree by more than `tol` on any
    /// open variable are rejected.
    pub fn from_values<S: Scalar>(
        system: &ConstraintSystem<S>,
        values: &[S],
        tol: S,
    ) -> Result<Self> {
        use std::collections::BTreeMap;
        let mut seen: BTreeMap<(usize, Option<usize>), Vec<S>> = BTreeMap::new();
        for (ctx, dec) in system.layout.decisions.iter().enumerate() {
            let xs: Vec<S> = system.layout.x[ctx].iter().map(|v| values[v.0]).collect();
            match seen.entry((dec.stage, dec.tree_node)) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(xs);
                }
                std::collections::btree_map::Entry::Occupied(e) => {
                    for (h, (a, b)) in e.get().iter().zip(&xs).enumerate() {
                        if (*a - *b).abs() > tol {
                            return Err(Error::Invalid(format!(
                                "plan copies for year {} disagree on option {}: {} vs {}",
                                dec.stage, h, a, b
                            )));
                        }
                    }
                }
            }
        }
        let entries = seen
            .into_iter()
            .map(|((stage, tree_node), xs)| PlanEntry {
                stage,
                tree_node,
                open: xs
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > real(0.5))
                    .map(|(h, _)| h)
                    .collect(),
            })
            .collect();
        Ok(BuildPlan { entries })
    }

    /// Open set for one year, preferring an entry conditioned on the given
    /// tree node and falling back to the year's unconditional entry.
    pub fn open_for(&self, stage: usize, tree_node: Option<usize>) -> Option<&[usize]> {
        if tree_node.is_some() {
            if let Some(e) = self
                .entries
                .iter()
                .find(|e| e.stage == stage && e.tree_node == tree_node)
            {
                return Some(&e.open);
            }
        }
        self.entries
            .iter()
            .find(|e| e.stage == stage && e.tree_node.is_none())
            .map(|e| e.open.as_slice())
    }
}

/// Everything a solve reports back.
#[derive(Clone, Debug, Serialize)]
pub struct SolveResult<S> {
    /// Terminal status.
    pub status: SolveStatus,
    /// Model form label.
    pub model: &'static str,
    /// Revenue encoding label.
    pub reform: &'static str,
    /// Exact objective of the best plan found, when one exists. Always the
    /// recomputed revenue of the rounded plan, never a raw LP value.
    pub objective: Option<S>,
    /// Best upper bound proved on the optimum.
    pub best_bound: S,
    /// Best plan found.
    pub plan: Option<BuildPlan>,
    /// Tangent cuts added across the whole run.
    pub cuts_added: usize,
    /// Search nodes solved.
    pub nodes_explored: usize,
    /// Wall-clock seconds spent.
    pub wall_time_s: f64,
}

impl<S: Scalar> SolveResult<S> {
    /// Remaining absolute gap, `best_bound - objective`; infinite when no
    /// plan was found.
    pub fn gap(&self) -> S {
        match self.objective {
            Some(obj) => self.best_bound - obj,
            None => S::infinity(),
        }
    }
}
