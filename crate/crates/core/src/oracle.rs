//! Independent exact solvers and policy evaluators.
//!
//! Everything here works on explicit open-set bitmasks and recomputes
//! revenue from first principles, sharing no code with the LP machinery, so
//! the two sides can check each other on small inputs:
//!
//! * [`enumerate_det`] — exhaustive search over monotone, budget-feasible
//!   expansion sequences for a fixed demand trajectory.
//! * [`dp_multistage`] — exact dynamic program over (tree node, open set)
//!   states for an adaptive plan on a scenario tree.
//! * [`evaluate_policy`] — exact expected value of a given plan on a tree,
//!   with budget and monotonicity validation.
//! * [`simulate_policy`] — out-of-sample value of a plan on a second tree it
//!   was not optimized for, mapping observed demands to the nearest planned
//!   branch.
//!
//! All of these are exponential in the option count and guarded by
//! [`Error::TooLarge`]; they exist for verification and small studies, not
//! production solves.

use crate::error::{Error, Result};
use crate::instance::{Instance, WeightTable};
use crate::scalar::{real, Scalar};
use crate::scenario::ScenarioTree;
use crate::solver::result::{BuildPlan, PlanEntry};

/// Masks are stored in `u32`; wider option sets are rejected up front.
const MAX_MASK_OPTIONS: usize = 24;
/// Exhaustive search gives up beyond this many visited sequences.
const MAX_SEQUENCES: usize = 1_000_000;
/// The dynamic program gives up beyond this many (state, superset) pairs.
const MAX_DP_TRANSITIONS: u128 = 200_000_000;
/// Slack applied to budget comparisons, mirroring LP feasibility tolerance.
const BUDGET_SLACK: f64 = 1e-9;

/// Expected value of a plan, broken down by year and by scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyValue<S> {
    /// Total expected revenue over the horizon.
    pub expected: S,
    /// Expected revenue per year (index `t - 1`).
    pub per_stage: Vec<S>,
    /// Realized revenue per scenario, in leaf order.
    pub per_scenario: Vec<S>,
}

/// Per-node revenue fractions: `frac[i][mask]` is the share of node `i`'s
/// demand captured (weighted by unit revenues) when `mask` is open, so the
/// node's revenue is `demand_i * frac[i][mask]`.
fn option_fractions<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
) -> Result<Vec<Vec<S>>> {
    let h = inst.num_options();
    if h > MAX_MASK_OPTIONS {
        return Err(Error::TooLarge(format!(
            "{} options exceed the {}-bit mask limit of exhaustive search",
            h, MAX_MASK_OPTIONS
        )));
    }
    let size = 1usize << h;
    let unit_revenues = inst.option_revenues();
    let mut frac = Vec::with_capacity(inst.num_nodes());
    for i in 0..inst.num_nodes() {
        let mut sum_w = vec![S::zero(); size];
        let mut sum_wr = vec![S::zero(); size];
        let mut f = vec![S::zero(); size];
        for mask in 1..size {
            let b = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            sum_w[mask] = sum_w[rest] + weights.w[i][b];
            sum_wr[mask] = sum_wr[rest] + weights.w[i][b] * unit_revenues[b];
            f[mask] = sum_wr[mask] / (weights.w_home[i] + sum_w[mask]);
        }
        frac.push(f);
    }
    Ok(frac)
}

/// Revenue earned at one demand vector under an open mask.
fn mask_revenue<S: Scalar>(frac: &[Vec<S>], demands: &[S], mask: u32) -> S {
    frac.iter()
        .zip(demands)
        .map(|(f, d)| *d * f[mask as usize])
        .sum()
}

/// Build cost of every mask.
fn mask_costs<S: Scalar>(inst: &Instance<S>) -> Vec<S> {
    let h = inst.num_options();
    let costs = inst.option_costs();
    let size = 1usize << h;
    let mut out = vec![S::zero(); size];
    for mask in 1..size {
        let b = mask.trailing_zeros() as usize;
        out[mask] = out[mask & (mask - 1)] + costs[b];
    }
    out
}

fn preexisting_mask<S: Scalar>(inst: &Instance<S>) -> u32 {
    inst.preexisting_open()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p)
        .fold(0u32, |m, (h, _)| m | 1 << h)
}

fn mask_to_open(mask: u32) -> Vec<usize> {
    (0..32).filter(|h| mask >> h & 1 == 1).collect()
}

/// Exhaustively solves the single-trajectory problem: every monotone,
/// budget-feasible sequence of open sets is scored and the best kept (ties
/// go to the sequence visited first in subset enumeration order). Returns
/// the optimal value and plan.
pub fn enumerate_det<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    trajectory: &[Vec<S>],
) -> Result<(S, BuildPlan)> {
    if trajectory.len() != inst.horizon {
        return Err(Error::Invalid(format!(
            "trajectory covers {} years, horizon is {}",
            trajectory.len(),
            inst.horizon
        )));
    }
    let frac = option_fractions(inst, weights)?;
    let costs = mask_costs(inst);
    let h = inst.num_options();
    let full = ((1u64 << h) - 1) as u32;
    let slack = real::<S>(BUDGET_SLACK);

    // Year-by-year revenue of every mask.
    let size = 1usize << h;
    let mut rev = vec![vec![S::zero(); size]; inst.horizon];
    for (t, row) in rev.iter_mut().enumerate() {
        for (mask, r) in row.iter_mut().enumerate() {
            *r = mask_revenue(&frac, &trajectory[t], mask as u32);
        }
    }

    struct Dfs<'a, S> {
        horizon: usize,
        budgets: &'a [S],
        costs: &'a [S],
        rev: &'a [Vec<S>],
        full: u32,
        slack: S,
        visited: usize,
        stack: Vec<u32>,
        best: Option<(S, Vec<u32>)>,
    }
    impl<S: Scalar> Dfs<'_, S> {
        fn go(&mut self, t: usize, mask: u32, acc: S) -> Result<()> {
            if t == self.horizon {
                self.visited += 1;
                if self.visited > MAX_SEQUENCES {
                    return Err(Error::TooLarge(format!(
                        "more than {} expansion sequences; exhaustive search refused",
                        MAX_SEQUENCES
                    )));
                }
                if self.best.as_ref().is_none_or(|(b, _)| acc > *b) {
                    self.best = Some((acc, self.stack.clone()));
                }
                return Ok(());
            }
            let comp = self.full & !mask;
            let mut add = comp;
            loop {
                if self.costs[add as usize] <= self.budgets[t] + self.slack {
                    let next = mask | add;
                    self.stack.push(next);
                    self.go(t + 1, next, acc + self.rev[t][next as usize])?;
                    self.stack.pop();
                }
                if add == 0 {
                    break;
                }
                add = (add - 1) & comp;
            }
            Ok(())
        }
    }

    let mut dfs = Dfs {
        horizon: inst.horizon,
        budgets: &inst.budgets,
        costs: &costs,
        rev: &rev,
        full,
        slack,
        visited: 0,
        stack: Vec::with_capacity(inst.horizon),
        best: None,
    };
    dfs.go(0, preexisting_mask(inst), S::zero())?;
    let (value, masks) = dfs.best.expect("the all-closed sequence is always feasible");
    let entries = masks
        .iter()
        .enumerate()
        .map(|(t, m)| PlanEntry { stage: t + 1, tree_node: None, open: mask_to_open(*m) })
        .collect();
    Ok((value, BuildPlan { entries }))
}

/// Exactly solves the adaptive problem on a scenario tree by dynamic
/// programming over (tree node, open set) states. Returns the optimal
/// expected value and the plan, one entry per interior node.
pub fn dp_multistage<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    tree: &ScenarioTree<S>,
) -> Result<(S, BuildPlan)> {
    if tree.stages != inst.horizon {
        return Err(Error::Invalid(format!(
            "tree depth {} does not match the {}-year horizon",
            tree.stages, inst.horizon
        )));
    }
    let frac = option_fractions(inst, weights)?;
    let h = inst.num_options();
    let size = 1usize << h;
    let interior = tree.nodes.iter().filter(|n| n.stage < tree.stages).count();
    let transitions = (interior as u128) * 3u128.pow(h as u32);
    if transitions > MAX_DP_TRANSITIONS {
        return Err(Error::TooLarge(format!(
            "{} interior nodes with {} options need {} transitions; dynamic program refused",
            interior, h, transitions
        )));
    }
    let costs = mask_costs(inst);
    let children = tree.children_index();
    let full = ((1u64 << h) - 1) as u32;
    let slack = real::<S>(BUDGET_SLACK);

    // value[n][m]: expected revenue-to-go at interior node n holding open
    // set m, before the year n.stage + 1 decision. Leaves carry no entry.
    let mut value: Vec<Vec<S>> = vec![Vec::new(); tree.nodes.len()];
    let mut choice: Vec<Vec<u32>> = vec![Vec::new(); tree.nodes.len()];

    for node in tree.nodes.iter().rev() {
        if node.stage >= tree.stages {
            continue;
        }
        // Value of arriving at each child with open set s, summed over
        // children with their conditional probabilities.
        let mut arrive = vec![S::zero(); size];
        for &c in &children[node.id] {
            let child = &tree.nodes[c];
            let tail = !value[c].is_empty();
            for (s, a) in arrive.iter_mut().enumerate() {
                let mut v = mask_revenue(&frac, &child.demands, s as u32);
                if tail {
                    v += value[c][s];
                }
                *a += child.prob * v;
            }
        }
        let budget = inst.budgets[node.stage];
        let mut val = vec![S::neg_infinity(); size];
        let mut pick = vec![0u32; size];
        for m in 0..size as u32 {
            let comp = full & !m;
            let mut add = comp;
            loop {
                if costs[add as usize] <= budget + slack {
                    let s = m | add;
                    if arrive[s as usize] > val[m as usize] {
                        val[m as usize] = arrive[s as usize];
                        pick[m as usize] = s;
                    }
                }
                if add == 0 {
                    break;
                }
                add = (add - 1) & comp;
            }
        }
        value[node.id] = val;
        choice[node.id] = pick;
    }

    // Walk the chosen decisions top-down to extract the plan.
    let root_mask = preexisting_mask(inst);
    let best = value[0][root_mask as usize];
    let mut entries = Vec::with_capacity(interior);
    let mut agenda = vec![(0usize, root_mask)];
    while let Some((id, held)) = agenda.pop() {
        let open = choice[id][held as usize];
        entries.push(PlanEntry {
            stage: tree.nodes[id].stage + 1,
            tree_node: Some(id),
            open: mask_to_open(open),
        });
        for &c in &children[id] {
            if tree.nodes[c].stage < tree.stages {
                agenda.push((c, open));
            }
        }
    }
    entries.sort_by_key(|e| (e.stage, e.tree_node));
    Ok((best, BuildPlan { entries }))
}

/// Open masks per interior tree node under a plan, validated for coverage,
/// monotonicity along tree edges, and yearly budgets.
fn plan_masks<S: Scalar>(
    inst: &Instance<S>,
    tree: &ScenarioTree<S>,
    plan: &BuildPlan,
) -> Result<Vec<u32>> {
    let h = inst.num_options();
    let costs = mask_costs(inst);
    let slack = real::<S>(BUDGET_SLACK * 100.0);
    let mut masks = vec![0u32; tree.nodes.len()];
    for node in &tree.nodes {
        if node.stage >= tree.stages {
            continue;
        }
        let open = plan.open_for(node.stage + 1, Some(node.id)).ok_or_else(|| {
            Error::Invalid(format!(
                "plan has no decision for year {} at tree node {}",
                node.stage + 1,
                node.id
            ))
        })?;
        let mut mask = 0u32;
        for &o in open {
            if o >= h {
                return Err(Error::Invalid(format!(
                    "plan opens option {} but the instance has {}",
                    o, h
                )));
            }
            mask |= 1 << o;
        }
        let held = match node.parent {
            Some(p) => masks[p],
            None => preexisting_mask(inst),
        };
        if held & !mask != 0 {
            return Err(Error::Invalid(format!(
                "plan closes stations at tree node {}: {:b} does not keep {:b}",
                node.id, mask, held
            )));
        }
        let added = mask & !held;
        if costs[added as usize] > inst.budgets[node.stage] + slack {
            return Err(Error::Invalid(format!(
                "plan overspends year {}: {} against budget {}",
                node.stage + 1,
                costs[added as usize],
                inst.budgets[node.stage]
            )));
        }
        masks[node.id] = mask;
    }
    Ok(masks)
}

/// Exact expected value of a plan on the tree it was built for. The plan
/// must cover every interior node (directly or through unconditional
/// entries), never close a station, and respect every year's budget.
pub fn evaluate_policy<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    tree: &ScenarioTree<S>,
    plan: &BuildPlan,
) -> Result<PolicyValue<S>> {
    if tree.stages != inst.horizon {
        return Err(Error::Invalid(format!(
            "tree depth {} does not match the {}-year horizon",
            tree.stages, inst.horizon
        )));
    }
    let frac = option_fractions(inst, weights)?;
    let masks = plan_masks(inst, tree, plan)?;
    Ok(policy_value(tree, &frac, |node| {
        masks[node.parent.expect("revenue node has a parent")]
    }))
}

/// Value of following per-node open masks on a tree; `mask_at` maps each
/// revenue-earning node (depth >= 1) to the open set it is served by.
fn policy_value<S: Scalar>(
    tree: &ScenarioTree<S>,
    frac: &[Vec<S>],
    mask_at: impl Fn(&crate::scenario::TreeNode<S>) -> u32,
) -> PolicyValue<S> {
    let mut per_stage = vec![S::zero(); tree.stages];
    for node in &tree.nodes {
        if node.stage >= 1 {
            let r = mask_revenue(frac, &node.demands, mask_at(node));
            per_stage[node.stage - 1] += tree.unconditional_prob(node.id) * r;
        }
    }
    let per_scenario = tree
        .leaves
        .iter()
        .map(|&leaf| {
            let mut total = S::zero();
            let mut cur = leaf;
            loop {
                let node = &tree.nodes[cur];
                if node.stage == 0 {
                    break;
                }
                total += mask_revenue(frac, &node.demands, mask_at(node));
                cur = node.parent.expect("deep node has a parent");
            }
            total
        })
        .collect();
    PolicyValue { expected: per_stage.iter().copied().sum(), per_stage, per_scenario }
}

/// Out-of-sample value of a plan on a tree it was not optimized for. Each
/// observed node of the evaluation tree is matched to a planned node by
/// walking the planning tree in lockstep: among the children of the current
/// match, the one closest in log-demand space is followed, and its planned
/// open set is applied.
pub fn simulate_policy<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    planned: &ScenarioTree<S>,
    plan: &BuildPlan,
    observed: &ScenarioTree<S>,
) -> Result<PolicyValue<S>> {
    if planned.stages != observed.stages {
        return Err(Error::Invalid(format!(
            "planning tree has {} stages, evaluation tree {}",
            planned.stages, observed.stages
        )));
    }
    if planned.nodes[0].demands.len() != observed.nodes[0].demands.len() {
        return Err(Error::Invalid(
            "planning and evaluation trees carry different node counts".into(),
        ));
    }
    let frac = option_fractions(inst, weights)?;
    let masks = plan_masks(inst, planned, plan)?;
    let planned_children = planned.children_index();

    // Match observed nodes to planned nodes level by level.
    let eps = real::<S>(1e-12);
    let mut matched = vec![0usize; observed.nodes.len()];
    for node in &observed.nodes {
        if node.stage == 0 {
            continue;
        }
        let from = matched[node.parent.expect("deep node has a parent")];
        let best = planned_children[from]
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = log_distance(&planned.nodes[a].demands, &node.demands, eps);
                let db = log_distance(&planned.nodes[b].demands, &node.demands, eps);
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("planned tree has children at every interior node");
        matched[node.id] = best;
    }

    Ok(policy_value(observed, &frac, |node| {
        let planned_parent = planned.nodes[matched[node.id]]
            .parent
            .expect("matched node sits at the same positive depth");
        masks[planned_parent]
    }))
}

fn log_distance<S: Scalar>(a: &[S], b: &[S], eps: S) -> S {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (*x + eps).ln() - (*y + eps).ln();
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{
        compute_weights, CandidateSite, DemandNode, MnlParams, StationType, Zone,
    };
    use crate::scenario::{build_tree, GrowthModel};

    fn two_site_instance() -> Instance<f64> {
        Instance {
            nodes: vec![DemandNode {
                id: 0,
                x: 0.0,
                y: 0.0,
                base_demand: 10.0,
                zone: Zone::Central,
            }],
            sites: vec![
                CandidateSite { id: 0, x: 1.0, y: 0.0 },
                CandidateSite { id: 1, x: 0.0, y: 2.0 },
            ],
            types: vec![StationType { id: 0, build_cost: 60.0, unit_revenue: 1.0 }],
            mnl: MnlParams { alpha_by_type: vec![0.0], alpha_home: 0.0, beta: -0.63 },
            budgets: vec![70.0, 70.0],
            horizon: 2,
            preexisting: Vec::new(),
            distance_matrix: None,
        }
    }

    /// w(dist 1) = exp(-0.63), w(dist 2) = exp(-1.26), w_home = 1.
    const W1: f64 = 0.5325918010068972;
    const W2: f64 = 0.2836540054559348;

    #[test]
    fn exhaustive_search_solves_a_hand_checkable_case() {
        let inst = two_site_instance();
        let weights = compute_weights(&inst).unwrap();
        let traj = vec![vec![10.0], vec![14.0]];
        let (value, plan) = enumerate_det(&inst, &weights, &traj).unwrap();

        // One affordable station per year. Year one: site 0 (nearer) earns
        // 10 w1/(1+w1). Year two adds site 1: 14 (w1+w2)/(1+w1+w2).
        let year1 = 10.0 * W1 / (1.0 + W1);
        let year2 = 14.0 * (W1 + W2) / (1.0 + W1 + W2);
        assert!((value - (year1 + year2)).abs() < 1e-12, "value {}", value);
        assert_eq!(plan.entries[0].open, vec![0]);
        assert_eq!(plan.entries[1].open, vec![0, 1]);
    }

    #[test]
    fn exhaustive_search_respects_preexisting_stations() {
        let mut inst = two_site_instance();
        inst.preexisting = vec![(1, 0)]; // site 1 already open
        let weights = compute_weights(&inst).unwrap();
        let traj = vec![vec![10.0], vec![14.0]];
        let (value, plan) = enumerate_det(&inst, &weights, &traj).unwrap();
        // Site 1 is free and stays; budget still allows building site 0.
        assert!(plan.entries[0].open.contains(&1));
        let both1 = 10.0 * (W1 + W2) / (1.0 + W1 + W2);
        let both2 = 14.0 * (W1 + W2) / (1.0 + W1 + W2);
        assert!((value - (both1 + both2)).abs() < 1e-12);
    }

    #[test]
    fn oversized_option_sets_are_refused() {
        let mut inst = two_site_instance();
        inst.sites = (0..25)
            .map(|id| CandidateSite { id, x: id as f64, y: 0.0 })
            .collect();
        let weights = compute_weights(&inst).unwrap();
        let traj = vec![vec![10.0], vec![14.0]];
        assert!(matches!(
            enumerate_det(&inst, &weights, &traj),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn dynamic_program_collapses_to_exhaustive_search_without_noise() {
        let inst = two_site_instance();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.25, 0.0);
        let tree = build_tree(&model, 2, 2, &[10.0], &[Zone::Central], 5).unwrap();
        let (dp_value, _) = dp_multistage(&inst, &weights, &tree).unwrap();

        // sd = 0 makes every branch identical: the adaptive optimum equals
        // the deterministic one on the common trajectory.
        let traj = vec![vec![10.0 * 1.25], vec![10.0 * 1.25 * 1.25]];
        let (det_value, _) = enumerate_det(&inst, &weights, &traj).unwrap();
        assert!(
            (dp_value - det_value).abs() < 1e-9,
            "dp {} vs exhaustive {}",
            dp_value,
            det_value
        );
    }

    #[test]
    fn policy_evaluation_matches_the_dynamic_program() {
        let inst = two_site_instance();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.3, 0.15);
        let tree = build_tree(&model, 3, 2, &[10.0], &[Zone::Central], 8).unwrap();
        let (dp_value, plan) = dp_multistage(&inst, &weights, &tree).unwrap();
        let eval = evaluate_policy(&inst, &weights, &tree, &plan).unwrap();
        assert!(
            (eval.expected - dp_value).abs() < 1e-9,
            "evaluation {} vs dp {}",
            eval.expected,
            dp_value
        );
        // Stage values add up, scenario values average up.
        let by_stage: f64 = eval.per_stage.iter().sum();
        assert!((by_stage - eval.expected).abs() < 1e-9);
        let by_scenario: f64 = tree
            .leaves
            .iter()
            .zip(&eval.per_scenario)
            .map(|(&leaf, v)| tree.unconditional_prob(leaf) * v)
            .sum();
        assert!((by_scenario - eval.expected).abs() < 1e-9);
    }

    #[test]
    fn policy_evaluation_rejects_broken_plans() {
        let inst = two_site_instance();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.3, 0.15);
        let tree = build_tree(&model, 2, 2, &[10.0], &[Zone::Central], 8).unwrap();

        // Missing years.
        let empty = BuildPlan::default();
        assert!(evaluate_policy(&inst, &weights, &tree, &empty).is_err());

        // Closing a station between years.
        let closing = BuildPlan {
            entries: vec![
                PlanEntry { stage: 1, tree_node: None, open: vec![0] },
                PlanEntry { stage: 2, tree_node: None, open: vec![1] },
            ],
        };
        assert!(evaluate_policy(&inst, &weights, &tree, &closing).is_err());

        // Overspending year one.
        let overspend = BuildPlan {
            entries: vec![
                PlanEntry { stage: 1, tree_node: None, open: vec![0, 1] },
                PlanEntry { stage: 2, tree_node: None, open: vec![0, 1] },
            ],
        };
        assert!(evaluate_policy(&inst, &weights, &tree, &overspend).is_err());
    }

    #[test]
    fn simulating_on_the_planning_tree_reproduces_the_evaluation() {
        let inst = two_site_instance();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.3, 0.2);
        let tree = build_tree(&model, 3, 2, &[10.0], &[Zone::Central], 21).unwrap();
        let (_, plan) = dp_multistage(&inst, &weights, &tree).unwrap();
        let eval = evaluate_policy(&inst, &weights, &tree, &plan).unwrap();
        let sim = simulate_policy(&inst, &weights, &tree, &plan, &tree).unwrap();
        assert!((sim.expected - eval.expected).abs() < 1e-9);
        assert_eq!(sim.per_scenario.len(), eval.per_scenario.len());
    }

    #[test]
    fn out_of_sample_value_never_beats_the_adaptive_optimum() {
        let inst = two_site_instance();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.3, 0.2);
        let tree = build_tree(&model, 3, 2, &[10.0], &[Zone::Central], 21).unwrap();
        let fresh = build_tree(&model, 3, 2, &[10.0], &[Zone::Central], 22).unwrap();
        let (_, plan) = dp_multistage(&inst, &weights, &tree).unwrap();
        let sim = simulate_policy(&inst, &weights, &tree, &plan, &fresh).unwrap();
        let (fresh_opt, _) = dp_multistage(&inst, &weights, &fresh).unwrap();
        assert!(
            sim.expected <= fresh_opt + 1e-9,
            "out-of-sample {} beat the clairvoyant optimum {}",
            sim.expected,
            fresh_opt
        );
    }
}
