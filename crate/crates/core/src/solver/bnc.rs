//! Branch and cut over the dense simplex.
//!
//! Best-bound search on binary fixings. Cut-based systems get their revenue
//! hypographs enforced lazily: optional rounds of tangent cuts at the root
//! fractional point tighten the loose initial relaxation, and every integral
//! LP optimum is checked exactly — an incumbent is accepted only once no
//! revenue variable overstates its context by more than the cut tolerance.
//! Linearized systems run the same search with nothing to separate.
//!
//! All cuts are tangent planes of concave functions, so they are valid for
//! every node of the tree and stay in the LP for the rest of the run.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::formulation::system::{ConstraintSystem, LazyRevenue, LinRow, Sense, VarId, VarKind};
use crate::scalar::{real, Scalar};

use super::backend::{LpBackend, LpStatus};
use super::result::{BuildPlan, SolveResult, SolveStatus};
use super::simplex::DenseSimplex;

/// Knobs of the branch-and-cut search.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Search-node budget.
    pub max_nodes: usize,
    /// Wall-clock budget in seconds.
    pub max_seconds: Option<f64>,
    /// A node whose bound is within this of the incumbent is pruned.
    pub abs_gap: f64,
    /// Distance from an integer below which a binary counts as integral.
    pub integrality_tol: f64,
    /// Minimum hypograph violation before a tangent cut is added.
    pub cut_tol: f64,
    /// Rounds of root separation at fractional points; 0 disables them.
    pub max_root_cut_rounds: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_nodes: 1_000_000,
            max_seconds: None,
            abs_gap: 1e-9,
            integrality_tol: 1e-6,
            cut_tol: 1e-7,
            max_root_cut_rounds: 8,
        }
    }
}

/// Tangent cut of one revenue hook at a point, when the point overstates
/// the revenue by more than `tol`. The cut `q <= c + g . x` is exact at the
/// point it was separated from and valid everywhere by concavity.
pub fn separate_sgi<S: Scalar>(
    hook: &LazyRevenue<S>,
    values: &[S],
    tol: S,
) -> Option<LinRow<S>> {
    let xhat: Vec<S> = hook.x.iter().map(|v| values[v.0]).collect();
    if values[hook.q.0] - hook.eval.value(&xhat) <= tol {
        return None;
    }
    let (g, c) = hook.eval.tangent(&xhat);
    let mut terms = vec![(hook.q, S::one())];
    for (v, gh) in hook.x.iter().zip(&g) {
        terms.push((*v, -*gh));
    }
    Some(LinRow { terms, sense: Sense::Le, rhs: c })
}

/// One open search node: fixings relative to the root, and the bound
/// inherited from its parent's relaxation.
struct Node<S> {
    bound: S,
    seq: usize,
    fixings: Vec<(u32, bool)>,
}

impl<S: Scalar> PartialEq for Node<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Node<S> {}
impl<S: Scalar> PartialOrd for Node<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Node<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: larger bound first; earlier nodes first among equals.
        self.bound
            .partial_cmp(&other.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solves a built system to proven optimality (within the configured gap)
/// by LP-based branch and cut.
pub fn branch_and_cut<S: Scalar>(
    system: &ConstraintSystem<S>,
    opts: &SolveOptions,
) -> Result<SolveResult<S>> {
    let start = Instant::now();
    let abs_gap = real::<S>(opts.abs_gap);
    let int_tol = real::<S>(opts.integrality_tol);
    let cut_tol = real::<S>(opts.cut_tol);

    let mut lp = DenseSimplex::new();
    lp.load(&system.vars, &system.rows, &system.objective);
    let root_bounds: Vec<(S, S)> = system.vars.iter().map(|v| (v.lb, v.ub)).collect();
    let binaries: Vec<usize> = system
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();

    let mut cuts_added = 0usize;
    let mut nodes_explored = 0usize;

    // Root separation: without any cut every revenue variable floats at its
    // upper bound, so a few rounds at the fractional optimum pay for
    // themselves before branching starts. Each added row makes every later
    // dense LP solve dearer, so the loop also stops once the bound stalls.
    if !system.lazy.is_empty() {
        let mut prev_bound = S::infinity();
        for _ in 0..opts.max_root_cut_rounds {
            let sol = lp.solve()?;
            if sol.status != LpStatus::Optimal {
                break;
            }
            let stalled = prev_bound - sol.objective
                <= real::<S>(1e-7) * (S::one() + sol.objective.abs());
            prev_bound = sol.objective;
            if stalled {
                break;
            }
            let mut any = false;
            for hook in &system.lazy {
                if let Some(cut) = separate_sgi(hook, &sol.values, cut_tol) {
                    lp.add_row(cut);
                    cuts_added += 1;
                    any = true;
                }
            }
            if !any {
                break;
            }
        }
    }

    let mut heap: BinaryHeap<Node<S>> = BinaryHeap::new();
    heap.push(Node { bound: S::infinity(), seq: 0, fixings: Vec::new() });
    let mut next_seq = 1usize;
    let mut incumbent: Option<(S, Vec<S>)> = None;
    let mut status = SolveStatus::Optimal;
    let mut last_popped = S::infinity();

    while let Some(node) = heap.pop() {
        let inc_val = incumbent.as_ref().map(|(v, _)| *v);
        if inc_val.is_some_and(|iv| node.bound <= iv + abs_gap) {
            continue;
        }
        // Best-bound order makes popped bounds non-increasing.
        debug_assert!(
            node.bound <= last_popped + real::<S>(1e-7),
            "bound order broken: popped {} after {}",
            node.bound,
            last_popped
        );
        last_popped = node.bound;

        if nodes_explored >= opts.max_nodes {
            status = SolveStatus::NodeLimit;
            heap.push(node);
            break;
        }
        if let Some(limit) = opts.max_seconds {
            if start.elapsed().as_secs_f64() >= limit {
                status = SolveStatus::TimeLimit;
                heap.push(node);
                break;
            }
        }
        nodes_explored += 1;

        // Install the node's box: root bounds, then its fixings.
        for (j, (lb, ub)) in root_bounds.iter().enumerate() {
            lp.set_bounds(VarId(j), *lb, *ub);
        }
        for &(j, up) in &node.fixings {
            let v = if up { S::one() } else { S::zero() };
            lp.set_bounds(VarId(j as usize), v, v);
        }

        // Solve, separating at integral points until the point is honest,
        // pruned, or fractional.
        let mut rounds = 0usize;
        let frac_sol = loop {
            let sol = lp.solve()?;
            if sol.status != LpStatus::Optimal {
                break None;
            }
            if inc_val.is_some_and(|iv| sol.objective <= iv + abs_gap) {
                break None;
            }
            if !system.is_integral(&sol.values, int_tol) {
                break Some(sol);
            }
            let mut any = false;
            for hook in &system.lazy {
                if let Some(cut) = separate_sgi(hook, &sol.values, cut_tol) {
                    lp.add_row(cut);
                    cuts_added += 1;
                    any = true;
                }
            }
            if !any {
                // Honest integral point: candidate incumbent at its exact
                // recomputed value.
                let value = system.exact_objective(&sol.values);
                if incumbent.as_ref().is_none_or(|(best, _)| value > *best) {
                    incumbent = Some((value, sol.values));
                }
                break None;
            }
            rounds += 1;
            if rounds > 1_000 {
                return Err(Error::Backend(
                    "cut separation failed to settle at an integral point".into(),
                ));
            }
        };

        let Some(sol) = frac_sol else { continue };

        // Branch on the most fractional binary; ties go to the lowest index.
        let mut pick = None;
        let mut pick_score = int_tol;
        for &j in &binaries {
            let v = sol.values[j];
            let score = (v - v.round()).abs();
            if score > pick_score {
                pick = Some(j);
                pick_score = score;
            }
        }
        let j = pick.expect("fractional solution has a fractional binary");
        let mut down = node.fixings.clone();
        down.push((j as u32, false));
        let mut up = node.fixings;
        up.push((j as u32, true));
        heap.push(Node { bound: sol.objective, seq: next_seq, fixings: down });
        heap.push(Node { bound: sol.objective, seq: next_seq + 1, fixings: up });
        next_seq += 2;
    }

    let (objective, values) = match incumbent {
        Some((v, vals)) => (Some(v), Some(vals)),
        None => (None, None),
    };
    if status == SolveStatus::Optimal && objective.is_none() {
        status = SolveStatus::Infeasible;
    }
    let best_bound = match status {
        SolveStatus::Optimal => objective.expect("optimal implies an incumbent"),
        SolveStatus::Infeasible => S::neg_infinity(),
        SolveStatus::NodeLimit | SolveStatus::TimeLimit => heap
            .iter()
            .map(|n| n.bound)
            .fold(objective.unwrap_or(S::neg_infinity()), S::max),
    };
    let plan = match &values {
        Some(vals) => Some(BuildPlan::from_values(system, vals, int_tol)?),
        None => None,
    };

    Ok(SolveResult {
        status,
        model: system.layout.form.label(),
        reform: system.layout.reform.label(),
        objective,
        best_bound,
        plan,
        cuts_added,
        nodes_explored,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
