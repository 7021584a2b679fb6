//! Builders that turn an instance plus demand data into constraint systems.
//!
//! All three planning models share a skeleton: binary open variables per
//! *decision context* (a point where one year's open set is chosen), yearly
//! budget rows on the increments, and monotone rows that forbid closing. A
//! *revenue context* — one (demand node, year[, scenario]) cell — then
//! contributes its captured revenue to the objective through the encoding
//! picked in [`BuildOptions`]: deferred tangent cuts (the default), the
//! lifted reciprocal linearization, or the bit-expansion linearization.
//!
//! Model forms:
//!
//! * [`build_det`]: one demand trajectory, one decision chain.
//! * [`build_ts`]: decisions fixed for the whole horizon up front. The
//!   compact variant collapses the tree to expected demands (the objective
//!   is linear in demand, so this is exact); the expanded variant keeps one
//!   revenue copy per scenario and is used for size accounting.
//! * [`build_ms`]: decisions adapt to observed demand. The node form puts
//!   one decision on every interior tree node; the scenario form copies
//!   decisions per (year, scenario) and ties indistinguishable copies with
//!   explicit non-anticipativity rows.

use crate::error::{Error, Result};
use crate::instance::{Instance, WeightTable};
use crate::scalar::Scalar;
use crate::scenario::ScenarioTree;
use crate::solver::qeval::QEvaluator;

use super::reform::{attach_r1, attach_r4};
use super::system::{
    empty_system, ConstraintSystem, DecisionCtx, Dims, LinRow, ModelForm, Reform, RevenueCtx,
    Sense, SystemLayout, VarId, VarTag,
};

/// Two-stage build variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TsForm {
    /// One revenue context per (node, year) on expected demands.
    Compact,
    /// One revenue context per (node, year, scenario), decisions shared.
    Expanded,
}

/// Multi-stage build variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsForm {
    /// Decisions on interior tree nodes (no duplicate copies).
    Node,
    /// Per-scenario decision copies plus non-anticipativity rows.
    Scenario,
}

/// Revenue encoding and its parameters.
#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// How fractional revenue terms are encoded.
    pub reform: Reform,
    /// Weight scale for the bit encoding: logit weights are rounded to
    /// integers after multiplying by this.
    pub r4_scale: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { reform: Reform::Sgi, r4_scale: 1000.0 }
    }
}

impl BuildOptions {
    /// Options for a given encoding with default parameters.
    pub fn with_reform(reform: Reform) -> Self {
        BuildOptions { reform, ..BuildOptions::default() }
    }
}

/// Builds the single-trajectory model. `trajectory[t-1][i]` is the demand
/// of node `i` in year `t`; the slice must cover every year of the horizon.
pub fn build_det<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    trajectory: &[Vec<S>],
    opts: &BuildOptions,
) -> Result<ConstraintSystem<S>> {
    check_trajectory(inst, trajectory)?;
    let decisions = chain_decisions(inst.horizon);
    let mut revenues = Vec::with_capacity(inst.horizon * inst.num_nodes());
    for t in 1..=inst.horizon {
        for i in 0..inst.num_nodes() {
            revenues.push(RevenueCtx {
                node: i,
                decision: t - 1,
                stage: t,
                scenario: None,
                tree_node: None,
                demand: trajectory[t - 1][i],
                weight: S::one(),
            });
        }
    }
    assemble(inst, weights, ModelForm::Det, decisions, revenues, 1, None, opts)
}

/// Builds the two-stage model from a scenario tree.
pub fn build_ts<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    tree: &ScenarioTree<S>,
    form: TsForm,
    opts: &BuildOptions,
) -> Result<ConstraintSystem<S>> {
    check_tree(inst, tree)?;
    let decisions = chain_decisions(inst.horizon);
    match form {
        TsForm::Compact => {
            let expected = tree.expected_demands();
            let mut revenues = Vec::with_capacity(inst.horizon * inst.num_nodes());
            for t in 1..=inst.horizon {
                for i in 0..inst.num_nodes() {
                    revenues.push(RevenueCtx {
                        node: i,
                        decision: t - 1,
                        stage: t,
                        scenario: None,
                        tree_node: None,
                        demand: expected[t][i],
                        weight: S::one(),
                    });
                }
            }
            assemble(inst, weights, ModelForm::TsCompact, decisions, revenues, 1, None, opts)
        }
        TsForm::Expanded => {
            let s_count = tree.num_scenarios();
            let mut revenues = Vec::with_capacity(inst.horizon * s_count * inst.num_nodes());
            for t in 1..=inst.horizon {
                for (s, &leaf) in tree.leaves.iter().enumerate() {
                    let node_id = tree.ancestor_at(leaf, t);
                    let prob = tree.unconditional_prob(leaf);
                    for i in 0..inst.num_nodes() {
                        revenues.push(RevenueCtx {
                            node: i,
                            decision: t - 1,
                            stage: t,
                            scenario: Some(s),
                            tree_node: Some(node_id),
                            demand: tree.nodes[node_id].demands[i],
                            weight: prob,
                        });
                    }
                }
            }
            assemble(
                inst,
                weights,
                ModelForm::TsExpanded,
                decisions,
                revenues,
                s_count,
                None,
                opts,
            )
        }
    }
}

/// Builds the multi-stage model from a scenario tree.
pub fn build_ms<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    tree: &ScenarioTree<S>,
    form: MsForm,
    opts: &BuildOptions,
) -> Result<ConstraintSystem<S>> {
    check_tree(inst, tree)?;
    match form {
        MsForm::Node => {
            // Interior nodes carry decisions; node at depth t fixes the
            // year-(t+1) open set for everything below it.
            let mut ctx_of = vec![usize::MAX; tree.nodes.len()];
            let mut decisions = Vec::new();
            for node in &tree.nodes {
                if node.stage < tree.stages {
                    ctx_of[node.id] = decisions.len();
                    decisions.push(DecisionCtx {
                        stage: node.stage + 1,
                        scenario: None,
                        tree_node: Some(node.id),
                        pred: node.parent.map(|p| ctx_of[p]),
                    });
                }
            }
            let mut revenues = Vec::new();
            for node in &tree.nodes {
                if node.stage >= 1 {
                    let parent = node.parent.expect("deep node has a parent");
                    let weight = tree.unconditional_prob(node.id);
                    for i in 0..inst.num_nodes() {
                        revenues.push(RevenueCtx {
                            node: i,
                            decision: ctx_of[parent],
                            stage: node.stage,
                            scenario: None,
                            tree_node: Some(node.id),
                            demand: node.demands[i],
                            weight,
                        });
                    }
                }
            }
            assemble(
                inst,
                weights,
                ModelForm::MsNode,
                decisions,
                revenues,
                tree.num_scenarios(),
                None,
                opts,
            )
        }
        MsForm::Scenario => {
            let s_count = tree.num_scenarios();
            let mut decisions = Vec::with_capacity(inst.horizon * s_count);
            for t in 1..=inst.horizon {
                for (s, &leaf) in tree.leaves.iter().enumerate() {
                    decisions.push(DecisionCtx {
                        stage: t,
                        scenario: Some(s),
                        tree_node: Some(tree.ancestor_at(leaf, t - 1)),
                        pred: (t > 1).then(|| (t - 2) * s_count + s),
                    });
                }
            }
            let mut revenues = Vec::with_capacity(inst.horizon * s_count * inst.num_nodes());
            for t in 1..=inst.horizon {
                for (s, &leaf) in tree.leaves.iter().enumerate() {
                    let node_id = tree.ancestor_at(leaf, t);
                    let prob = tree.unconditional_prob(leaf);
                    for i in 0..inst.num_nodes() {
                        revenues.push(RevenueCtx {
                            node: i,
                            decision: (t - 1) * s_count + s,
                            stage: t,
                            scenario: Some(s),
                            tree_node: Some(node_id),
                            demand: tree.nodes[node_id].demands[i],
                            weight: prob,
                        });
                    }
                }
            }
            assemble(
                inst,
                weights,
                ModelForm::MsScenario,
                decisions,
                revenues,
                s_count,
                Some(tree),
                opts,
            )
        }
    }
}

/// Decision chain for models without scenario-indexed decisions.
fn chain_decisions(horizon: usize) -> Vec<DecisionCtx> {
    (1..=horizon)
        .map(|t| DecisionCtx {
            stage: t,
            scenario: None,
            tree_node: None,
            pred: (t > 1).then(|| t - 2),
        })
        .collect()
}

fn check_trajectory<S: Scalar>(inst: &Instance<S>, trajectory: &[Vec<S>]) -> Result<()> {
    if trajectory.len() != inst.horizon {
        return Err(Error::Invalid(format!(
            "trajectory covers {} years, horizon is {}",
            trajectory.len(),
            inst.horizon
        )));
    }
    for (t, row) in trajectory.iter().enumerate() {
        if row.len() != inst.num_nodes() {
            return Err(Error::Invalid(format!(
                "trajectory year {} has {} demands for {} nodes",
                t + 1,
                row.len(),
                inst.num_nodes()
            )));
        }
        for d in row {
            if !(d.is_finite() && *d >= S::zero()) {
                return Err(Error::Invalid(format!(
                    "trajectory year {} has a negative or non-finite demand",
                    t + 1
                )));
            }
        }
    }
    Ok(())
}

fn check_tree<S: Scalar>(inst: &Instance<S>, tree: &ScenarioTree<S>) -> Result<()> {
    if tree.stages != inst.horizon {
        return Err(Error::Invalid(format!(
            "tree depth {} does not match the {}-year horizon",
            tree.stages, inst.horizon
        )));
    }
    if tree.nodes[0].demands.len() != inst.num_nodes() {
        return Err(Error::Invalid(format!(
            "tree carries {} demands per node for {} instance nodes",
            tree.nodes[0].demands.len(),
            inst.num_nodes()
        )));
    }
    Ok(())
}

/// Shared skeleton: open variables, budget and monotone rows, optional
/// non-anticipativity rows, then the chosen revenue encoding.
#[allow(clippy::too_many_arguments)]
fn assemble<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    form: ModelForm,
    decisions: Vec<DecisionCtx>,
    revenues: Vec<RevenueCtx<S>>,
    scenarios: usize,
    na_tree: Option<&ScenarioTree<S>>,
    opts: &BuildOptions,
) -> Result<ConstraintSystem<S>> {
    let h_count = inst.num_options();
    let costs = inst.option_costs();
    let pre = inst.preexisting_open();
    let pre_cost: S = costs
        .iter()
        .zip(&pre)
        .filter(|(_, p)| **p)
        .map(|(c, _)| *c)
        .sum();

    let mut sys = empty_system(SystemLayout {
        form,
        reform: opts.reform,
        dims: Dims {
            nodes: inst.num_nodes(),
            options: h_count,
            stages: inst.horizon,
            scenarios,
            r4_bits: None,
        },
        decisions: Vec::new(),
        revenues: Vec::new(),
        x: Vec::new(),
    });

    let mut x: Vec<Vec<VarId>> = Vec::with_capacity(decisions.len());
    for ctx in 0..decisions.len() {
        let row: Vec<VarId> = (0..h_count)
            .map(|h| sys.add_binary(VarTag::Open { ctx, option: h }))
            .collect();
        x.push(row);
    }
    // Stations open before the horizon stay open from the first year on;
    // their build cost does not hit the first budget.
    for (ctx, dec) in decisions.iter().enumerate() {
        if dec.pred.is_none() {
            for h in 0..h_count {
                if pre[h] {
                    sys.vars[x[ctx][h].0].lb = S::one();
                }
            }
        }
    }

    for (ctx, dec) in decisions.iter().enumerate() {
        let mut terms: Vec<(VarId, S)> =
            (0..h_count).map(|h| (x[ctx][h], costs[h])).collect();
        let mut rhs = inst.budgets[dec.stage - 1];
        match dec.pred {
            Some(p) => {
                for h in 0..h_count {
                    terms.push((x[p][h], -costs[h]));
                }
            }
            None => rhs += pre_cost,
        }
        sys.rows.push(LinRow { terms, sense: Sense::Le, rhs });
    }

    for (ctx, dec) in decisions.iter().enumerate() {
        if let Some(p) = dec.pred {
            for h in 0..h_count {
                sys.rows.push(LinRow {
                    terms: vec![(x[p][h], S::one()), (x[ctx][h], -S::one())],
                    sense: Sense::Le,
                    rhs: S::zero(),
                });
            }
        }
    }

    if let Some(tree) = na_tree {
        // Scenarios sharing history up to the decision year must build the
        // same stations: tie each class together with a chain of equalities.
        for t in 1..=inst.horizon {
            for class in tree.equivalence_classes(t)? {
                for pair in class.windows(2) {
                    let a = (t - 1) * scenarios + pair[0];
                    let b = (t - 1) * scenarios + pair[1];
                    for h in 0..h_count {
                        sys.rows.push(LinRow {
                            terms: vec![(x[a][h], S::one()), (x[b][h], -S::one())],
                            sense: Sense::Eq,
                            rhs: S::zero(),
                        });
                    }
                }
            }
        }
    }

    sys.layout.decisions = decisions;
    sys.layout.x = x;
    sys.layout.revenues = revenues;

    let unit_revenues = inst.option_revenues();
    sys.evaluators = sys
        .layout
        .revenues
        .iter()
        .map(|r| {
            let d: Vec<S> = unit_revenues.iter().map(|u| *u * r.demand).collect();
            QEvaluator::new(weights.w_home[r.node], weights.w[r.node].clone(), d)
        })
        .collect();

    match opts.reform {
        Reform::Sgi => attach_sgi(&mut sys),
        Reform::R1 => attach_r1(&mut sys, inst, weights),
        Reform::R4 => attach_r4(&mut sys, inst, weights, opts.r4_scale)?,
    }
    Ok(sys)
}

/// Attaches one bounded revenue variable per context, its objective term,
/// and the deferred definition used for lazy tangent-cut separation.
fn attach_sgi<S: Scalar>(sys: &mut ConstraintSystem<S>) {
    for rev in 0..sys.layout.revenues.len() {
        let eval = sys.evaluators[rev].clone();
        let weight = sys.layout.revenues[rev].weight;
        let decision = sys.layout.revenues[rev].decision;
        let q = sys.add_continuous(S::zero(), eval.d_max(), VarTag::Revenue { rev });
        sys.objective.terms.push((q, weight));
        let x = sys.layout.x[decision].clone();
        sys.lazy.push(super::system::LazyRevenue { rev, q, x, eval });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::system::{add_soc_rows, VarKind};
    use crate::instance::{
        compute_weights, generate_instance, CandidateSite, DemandNode, GeneratorConfig, MnlParams,
        StationType, Zone,
    };
    use crate::scenario::{build_tree, GrowthModel};

    /// 1 node, 2 sites, 1 type, 2 years: small enough to count by hand.
    fn hand_instance() -> Instance<f64> {
        Instance {
            nodes: vec![DemandNode { id: 0, x: 0.0, y: 0.0, base_demand: 10.0, zone: Zone::Central }],
            sites: vec![
                CandidateSite { id: 0, x: 1.0, y: 0.0 },
                CandidateSite { id: 1, x: 0.0, y: 1.0 },
            ],
            types: vec![StationType { id: 0, build_cost: 60.0, unit_revenue: 1.0 }],
            mnl: MnlParams { alpha_by_type: vec![0.0], alpha_home: 0.0, beta: -0.63 },
            budgets: vec![70.0, 70.0],
            horizon: 2,
            preexisting: Vec::new(),
            distance_matrix: None,
        }
    }

    fn hand_system(opts: &BuildOptions) -> ConstraintSystem<f64> {
        let inst = hand_instance();
        let weights = compute_weights(&inst).unwrap();
        let traj = vec![vec![10.0], vec![14.0]];
        build_det(&inst, &weights, &traj, opts).unwrap()
    }

    #[test]
    fn hand_counted_deterministic_build() {
        let sys = hand_system(&BuildOptions::default());
        // x: 2 options x 2 years; q: 1 node x 2 years.
        assert_eq!(sys.num_binary(), 4);
        assert_eq!(sys.num_continuous(), 2);
        // Rows: 2 budget + 2 monotone. Revenue enforcement is deferred.
        assert_eq!(sys.rows.len(), 4);
        assert_eq!(sys.lazy.len(), 2);
        assert_eq!(sys.soc_rows.len(), 0);
        assert_eq!(sys.objective.terms.len(), 2);
        // Budgets: year one can afford one station (60 <= 70), not two.
        let budget = &sys.rows[0];
        assert_eq!(budget.sense, Sense::Le);
        assert_eq!(budget.rhs, 70.0);
        assert_eq!(budget.terms.len(), 2);
    }

    #[test]
    fn q_bounds_follow_demand() {
        let sys = hand_system(&BuildOptions::default());
        let q_bounds: Vec<(f64, f64)> = sys
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Continuous)
            .map(|v| (v.lb, v.ub))
            .collect();
        // Year-one revenue is at most the full demand (10), year two 14.
        assert_eq!(q_bounds, vec![(0.0, 10.0), (0.0, 14.0)]);
    }

    #[test]
    fn preexisting_stations_are_forced_open_and_free() {
        let mut inst = hand_instance();
        inst.preexisting = vec![(0, 0)];
        inst.validate().unwrap();
        let weights = compute_weights(&inst).unwrap();
        let traj = vec![vec![10.0], vec![14.0]];
        let sys = build_det(&inst, &weights, &traj, &BuildOptions::default()).unwrap();
        // Option 0 locked open in year one.
        assert_eq!(sys.vars[0].lb, 1.0);
        assert_eq!(sys.vars[1].lb, 0.0);
        // First budget expands by the preexisting cost.
        assert_eq!(sys.rows[0].rhs, 70.0 + 60.0);
    }

    #[test]
    fn cone_rows_attach_one_per_context_and_accept_feasible_points() {
        let mut sys = hand_system(&BuildOptions::default());
        add_soc_rows(&mut sys);
        assert_eq!(sys.soc_rows.len(), 2);
        // x = (1, 0) both years, q at the true revenue: feasible, tight.
        let mut values = vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        for hook in &sys.lazy {
            let x: Vec<f64> = hook.x.iter().map(|v| values[v.0]).collect();
            values[hook.q.0] = hook.eval.value(&x);
        }
        for row in &sys.soc_rows {
            let r = row.residual(&values);
            assert!(r.abs() < 1e-9, "tight at the exact revenue, got residual {}", r);
        }
        // Overstating q violates the cone.
        values[4] += 1e-3;
        assert!(sys.soc_rows[0].residual(&values) < 0.0);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let inst = hand_instance();
        let weights = compute_weights(&inst).unwrap();
        let opts = BuildOptions::default();
        let short = vec![vec![10.0]];
        assert!(build_det(&inst, &weights, &short, &opts).is_err());
        let ragged = vec![vec![10.0], vec![14.0, 2.0]];
        assert!(build_det(&inst, &weights, &ragged, &opts).is_err());

        let model = GrowthModel::uniform(0.3, 0.1);
        let deep = build_tree(&model, 2, 3, &[10.0], &[Zone::Central], 1).unwrap();
        assert!(build_ts(&inst, &weights, &deep, TsForm::Compact, &opts).is_err());
        assert!(build_ms(&inst, &weights, &deep, MsForm::Node, &opts).is_err());
    }

    #[test]
    fn scenario_form_ties_indistinguishable_copies() {
        let inst = hand_instance();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.3, 0.1);
        let tree = build_tree(&model, 2, 2, &[10.0], &[Zone::Central], 3).unwrap();
        let sys = build_ms(&inst, &weights, &tree, MsForm::Scenario, &BuildOptions::default()).unwrap();

        let s = 4; // scenarios
        let h = 2; // options
        assert_eq!(sys.num_binary(), h * 2 * s); // |H| * |T| * |S|
        assert_eq!(sys.num_continuous(), 2 * s); // |I| * |T| * |S|
        // Year 1: one class of 4 (3 equality chains); year 2: 2 classes of 2
        // (2 chains); each chain carries one row per option.
        let eq_rows = sys.rows.iter().filter(|r| r.sense == Sense::Eq).count();
        assert_eq!(eq_rows, (3 + 2) * h);
        // Budget rows per decision copy, monotone rows for year 2 copies.
        let le_rows = sys.rows.iter().filter(|r| r.sense == Sense::Le).count();
        assert_eq!(le_rows, 2 * s + h * s);
    }

    #[test]
    fn node_form_matches_tree_structure() {
        let inst = hand_instance();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.3, 0.1);
        let tree = build_tree(&model, 3, 2, &[10.0], &[Zone::Central], 9).unwrap();
        let sys = build_ms(&inst, &weights, &tree, MsForm::Node, &BuildOptions::default()).unwrap();
        // Interior nodes: root + 3 children; revenue nodes: 3 + 9.
        assert_eq!(sys.layout.decisions.len(), 4);
        assert_eq!(sys.layout.revenues.len(), 12);
        assert_eq!(sys.num_binary(), 4 * 2);
        assert_eq!(sys.num_continuous(), 12);
        // Objective weights: each depth-1 node 1/3, each leaf 1/9.
        let w: f64 = sys.objective.terms.iter().map(|(_, c)| *c).sum();
        assert!((w - (3.0 / 3.0 + 9.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn expanded_two_stage_shares_decisions() {
        let inst = hand_instance();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.3, 0.1);
        let tree = build_tree(&model, 2, 2, &[10.0], &[Zone::Central], 3).unwrap();
        let sys = build_ts(&inst, &weights, &tree, TsForm::Expanded, &BuildOptions::default()).unwrap();
        assert_eq!(sys.layout.decisions.len(), 2); // still one chain
        assert_eq!(sys.num_binary(), 2 * 2);
        assert_eq!(sys.num_continuous(), 1 * 2 * 4); // |I| |T| |S|
        // Per-scenario weights sum to one within each year.
        let total: f64 = sys.objective.terms.iter().map(|(_, c)| *c).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn desk_scale_counts_follow_formulas() {
        let cfg = GeneratorConfig::default();
        let inst = generate_instance::<f64>(1, &cfg).unwrap();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.435, 0.096);
        let tree = build_tree(&model, 3, 3, &inst.base_demands(), &inst.zones(), 2).unwrap();
        let sys = build_ms(&inst, &weights, &tree, MsForm::Scenario, &BuildOptions::default()).unwrap();
        let s = 27;
        assert_eq!(sys.num_binary(), 12 * 3 * s);
        assert_eq!(sys.num_continuous(), 20 * 3 * s);
        assert_eq!(sys.lazy.len(), 20 * 3 * s);
    }

    #[test]
    fn dump_lp_names_the_parts() {
        let sys = hand_system(&BuildOptions::default());
        let text = sys.dump_lp();
        assert!(text.contains("Maximize"));
        assert!(text.contains("x_d0_o0"));
        assert!(text.contains("q_r0"));
        assert!(text.contains("Binaries"));
        assert!(text.contains("2 lazy revenue terms"));
    }
}
