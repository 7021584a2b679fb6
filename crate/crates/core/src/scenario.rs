//! Scenario trees of demand-growth paths.
//!
//! Demand at node `i` evolves as `d[t][i] = d[t-1][i] * (1 + rate)` where
//! the yearly growth rate is Gaussian, `rate = mean + sd * z`, truncated
//! below at -1 so demand stays nonnegative. A [`ScenarioTree`] unrolls this
//! over a full `branching`-ary tree: the root (stage 0) carries first-year
//! demands, every deeper node carries one growth draw per demand node and
//! the resulting demands, and each leaf spells out one demand path
//! (a *scenario*).
//!
//! Draws can be independent per demand node or shared across all nodes of a
//! zone ([`DrawMode`]); zone-level draws make regional booms and busts move
//! whole areas together. Draw order is fixed (level by level, parents in id
//! order, children in branch order), so the same seed yields the same tree
//! and, because the number of draws does not depend on the rate parameters,
//! two trees built with the same seed but different means or spreads share
//! their underlying standard-normal draws — common random numbers for
//! parameter sweeps.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Zone;
use crate::scalar::{real, Scalar};

/// Gaussian yearly growth-rate distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateDist<S> {
    /// Mean yearly growth rate (0.435 means +43.5% per year).
    pub mean: S,
    /// Standard deviation of the yearly growth rate.
    pub sd: S,
}

/// How growth draws are shared among demand nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    /// One independent draw per demand node.
    PerNode,
    /// One draw per zone; all nodes of a zone grow in lockstep.
    PerZone,
}

/// Growth-rate model: one distribution per zone plus the draw-sharing mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthModel<S> {
    /// Growth distribution for central nodes.
    pub central: RateDist<S>,
    /// Growth distribution for suburban nodes.
    pub suburb: RateDist<S>,
    /// Draw-sharing mode.
    pub mode: DrawMode,
}

impl<S: Scalar> GrowthModel<S> {
    /// Same distribution for both zones, independent draws per node.
    pub fn uniform(mean: S, sd: S) -> Self {
        let dist = RateDist { mean, sd };
        GrowthModel {
            central: dist,
            suburb: dist,
            mode: DrawMode::PerNode,
        }
    }

    /// Distribution for the given zone.
    pub fn for_zone(&self, zone: Zone) -> RateDist<S> {
        match zone {
            Zone::Central => self.central,
            Zone::Suburb => self.suburb,
        }
    }

    fn validate(&self) -> Result<()> {
        for dist in [self.central, self.suburb] {
            if !(dist.mean.is_finite() && dist.mean > real(-1.0)) {
                return Err(Error::Invalid(
                    "mean growth rate must be finite and above -1".into(),
                ));
            }
            if !(dist.sd.is_finite() && dist.sd >= S::zero()) {
                return Err(Error::Invalid(
                    "growth-rate spread must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Shifts the suburban mean growth rate `offset` above (or below) the
/// central one and switches to zone-level draws, so regional demand moves
/// as a block. Central is left untouched.
///
/// Panics if the offset pushes the suburban mean to -1 or below.
pub fn apply_heterogeneity<S: Scalar>(base: &GrowthModel<S>, offset: S) -> GrowthModel<S> {
    let mean = base.central.mean + offset;
    assert!(
        mean > real(-1.0),
        "suburb mean growth must stay above -1, got {}",
        mean
    );
    GrowthModel {
        central: base.central,
        suburb: RateDist {
            mean,
            sd: base.central.sd,
        },
        mode: DrawMode::PerZone,
    }
}

/// One node of a scenario tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode<S> {
    /// Dense 0-based id in breadth-first order (root is 0).
    pub id: usize,
    /// Parent id; `None` for the root.
    pub parent: Option<usize>,
    /// Depth: 0 for the root, `stages` for the leaves.
    pub stage: usize,
    /// Probability of this node given its parent (1 for the root).
    pub prob: S,
    /// Growth rates drawn on the edge from the parent, one per demand node;
    /// empty for the root.
    pub rates: Vec<S>,
    /// Demands at this node, one per demand node:
    /// `demands[i] = parent.demands[i] * (1 + rates[i])`.
    pub demands: Vec<S>,
}

/// A full `branching`-ary scenario tree over `stages` years.
///
/// Depth maps to years as follows: a node at depth `t >= 1` carries the
/// year-`t` demands, while the root carries the demands already observed
/// before planning starts. The year-`t` build decision may therefore depend
/// on everything up to depth `t-1`, and year-`t` revenue is earned at the
/// demands of depth-`t` nodes. A *scenario* is a root-to-leaf path, indexed
/// by position in `leaves`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTree<S> {
    /// Number of uncertain transitions (tree depth).
    pub stages: usize,
    /// All nodes in breadth-first order.
    pub nodes: Vec<TreeNode<S>>,
    /// Ids of the deepest-level nodes, in id order; scenario `s` is
    /// `leaves[s]`'s root path.
    pub leaves: Vec<usize>,
}

/// One scenario unrolled: its probability and the demand vector at each
/// depth 0..=stages along the path.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioPath<S> {
    /// Unconditional probability of the scenario.
    pub prob: S,
    /// `demands[t][i]` is the demand at node `i` at depth `t`, for
    /// `t = 0..=stages` (index 0 is the root).
    pub demands: Vec<Vec<S>>,
}

/// Builds a full scenario tree.
///
/// `base_demands` and `zones` come from the instance; `stages` is usually
/// the planning horizon. Total node count is capped at ten million.
pub fn build_tree<S: Scalar>(
    model: &GrowthModel<S>,
    branching: usize,
    stages: usize,
    base_demands: &[S],
    zones: &[Zone],
    seed: u64,
) -> Result<ScenarioTree<S>> {
    model.validate()?;
    if branching == 0 || stages == 0 {
        return Err(Error::Invalid("branching and stages must be at least one".into()));
    }
    if base_demands.is_empty() || base_demands.len() != zones.len() {
        return Err(Error::Invalid(format!(
            "need one zone per base demand, got {} demands and {} zones",
            base_demands.len(),
            zones.len()
        )));
    }
    for d in base_demands {
        if !(d.is_finite() && *d >= S::zero()) {
            return Err(Error::Invalid("base demands must be nonnegative and finite".into()));
        }
    }
    let mut total: usize = 1;
    let mut level: usize = 1;
    for _ in 0..stages {
        level = level
            .checked_mul(branching)
            .filter(|_| total < 10_000_000)
            .ok_or_else(|| Error::TooLarge("scenario tree exceeds ten million nodes".into()))?;
        total += level;
    }
    if total > 10_000_000 {
        return Err(Error::TooLarge(format!(
            "scenario tree would have {} nodes (cap ten million)",
            total
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let branch_prob = S::one() / real::<S>(branching as f64);
    let n = base_demands.len();

    let mut nodes = Vec::with_capacity(total);
    nodes.push(TreeNode {
        id: 0,
        parent: None,
        stage: 0,
        prob: S::one(),
        rates: Vec::new(),
        demands: base_demands.to_vec(),
    });

    let mut level_start = 0usize;
    for depth in 1..=stages {
        let level_end = nodes.len();
        for parent in level_start..level_end {
            for _ in 0..branching {
                // Draw order is part of the format: per-node draws in node
                // id order, zone draws central first. Both zone draws happen
                // even if a zone is empty, so draw counts only depend on the
                // tree shape and mode.
                let mut rates = Vec::with_capacity(n);
                match model.mode {
                    DrawMode::PerNode => {
                        for zone in zones {
                            let z: f64 = normal.sample(&mut rng);
                            rates.push(clamped_rate(model.for_zone(*zone), z));
                        }
                    }
                    DrawMode::PerZone => {
                        let z_central: f64 = normal.sample(&mut rng);
                        let z_suburb: f64 = normal.sample(&mut rng);
                        for zone in zones {
                            let z = match zone {
                                Zone::Central => z_central,
                                Zone::Suburb => z_suburb,
                            };
                            rates.push(clamped_rate(model.for_zone(*zone), z));
                        }
                    }
                }
                let parent_demands = &nodes[parent].demands;
                let demands: Vec<S> = parent_demands
                    .iter()
                    .zip(&rates)
                    .map(|(d, r)| *d * (S::one() + *r))
                    .collect();
                let id = nodes.len();
                nodes.push(TreeNode {
                    id,
                    parent: Some(parent),
                    stage: depth,
                    prob: branch_prob,
                    rates,
                    demands,
                });
            }
        }
        level_start = level_end;
    }

    let leaves = (level_start..nodes.len()).collect();
    Ok(ScenarioTree { stages, nodes, leaves })
}

/// Growth rate `mean + sd * z`, truncated below at -1 so demand cannot go
/// negative.
fn clamped_rate<S: Scalar>(dist: RateDist<S>, z: f64) -> S {
    let rate = dist.mean + dist.sd * real(z);
    rate.max(real(-1.0))
}

impl<S: Scalar> ScenarioTree<S> {
    /// Number of scenarios (leaves).
    pub fn num_scenarios(&self) -> usize {
        self.leaves.len()
    }

    /// Children ids per node id.
    pub fn children_index(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.nodes.len()];
        for node in &self.nodes {
            if let Some(p) = node.parent {
                children[p].push(node.id);
            }
        }
        children
    }

    /// Unconditional probability of reaching a node.
    pub fn unconditional_prob(&self, id: usize) -> S {
        let mut p = self.nodes[id].prob;
        let mut cur = self.nodes[id].parent;
        while let Some(up) = cur {
            p *= self.nodes[up].prob;
            cur = self.nodes[up].parent;
        }
        p
    }

    /// Ancestor of a node at the given depth (the node itself if `depth`
    /// equals its stage).
    pub fn ancestor_at(&self, id: usize, depth: usize) -> usize {
        assert!(depth <= self.nodes[id].stage, "ancestor below the node");
        let mut cur = id;
        while self.nodes[cur].stage > depth {
            cur = self.nodes[cur].parent.expect("non-root node has a parent");
        }
        cur
    }

    /// Groups scenarios that are indistinguishable when the year-`t`
    /// decision is made (they share the depth `t-1` ancestor). `t` ranges
    /// over `1..=stages`; `t = 1` yields a single class with every
    /// scenario. Classes are ordered by ancestor id and scenario indices
    /// ascend within each class, so together they partition `0..S`.
    pub fn equivalence_classes(&self, t: usize) -> Result<Vec<Vec<usize>>> {
        if t == 0 || t > self.stages {
            return Err(Error::Invalid(format!(
                "decision year {} outside 1..={}",
                t, self.stages
            )));
        }
        let mut classes: Vec<(usize, Vec<usize>)> = Vec::new();
        for (s, &leaf) in self.leaves.iter().enumerate() {
            let anchor = self.ancestor_at(leaf, t - 1);
            match classes.last_mut() {
                Some((a, members)) if *a == anchor => members.push(s),
                // Breadth-first ids make leaves of a subtree contiguous, so
                // a new anchor can only appear after the previous one ends.
                _ => classes.push((anchor, vec![s])),
            }
        }
        Ok(classes.into_iter().map(|(_, members)| members).collect())
    }

    /// Unrolls every scenario into its demand path.
    pub fn leaf_trajectories(&self) -> Vec<ScenarioPath<S>> {
        self.leaves
            .iter()
            .map(|&leaf| {
                let mut chain = Vec::with_capacity(self.stages + 1);
                let mut cur = Some(leaf);
                while let Some(id) = cur {
                    chain.push(id);
                    cur = self.nodes[id].parent;
                }
                chain.reverse();
                ScenarioPath {
                    prob: self.unconditional_prob(leaf),
                    demands: chain.iter().map(|&id| self.nodes[id].demands.clone()).collect(),
                }
            })
            .collect()
    }

    /// Probability-weighted demands per depth: `out[t][i]` is the expected
    /// demand at node `i` at depth `t`, for `t = 0..=stages`.
    pub fn expected_demands(&self) -> Vec<Vec<S>> {
        let n = self.nodes[0].demands.len();
        let mut out = vec![vec![S::zero(); n]; self.stages + 1];
        let mut probs = vec![S::zero(); self.nodes.len()];
        for node in &self.nodes {
            let p = match node.parent {
                None => node.prob,
                Some(parent) => probs[parent] * node.prob,
            };
            probs[node.id] = p;
            for (acc, d) in out[node.stage].iter_mut().zip(&node.demands) {
                *acc += p * *d;
            }
        }
        out
    }

    /// Fraction of expected final-year demand located in the central zone.
    pub fn central_demand_share(&self, zones: &[Zone]) -> S {
        let last = &self.expected_demands()[self.stages];
        assert_eq!(last.len(), zones.len(), "one zone per demand node");
        let central: S = last
            .iter()
            .zip(zones)
            .filter(|(_, z)| **z == Zone::Central)
            .map(|(d, _)| *d)
            .sum();
        let total: S = last.iter().copied().sum();
        central / total
    }

    /// Checks tree structure: breadth-first dense ids, parent depths,
    /// children probabilities summing to one, demand recurrence, leaves
    /// listing exactly the deepest level.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Invalid("tree has no nodes".into()));
        }
        let n = self.nodes[0].demands.len();
        if n == 0 {
            return Err(Error::Invalid("tree carries no demand entries".into()));
        }
        let mut child_prob = vec![S::zero(); self.nodes.len()];
        let mut has_child = vec![false; self.nodes.len()];
        for (pos, node) in self.nodes.iter().enumerate() {
            if node.id != pos {
                return Err(Error::Invalid(format!(
                    "node ids must be dense 0-based; found id {} at position {}",
                    node.id, pos
                )));
            }
            if node.demands.len() != n {
                return Err(Error::Invalid(format!(
                    "node {} has {} demands, expected {}",
                    node.id,
                    node.demands.len(),
                    n
                )));
            }
            for d in &node.demands {
                if !(d.is_finite() && *d >= S::zero()) {
                    return Err(Error::Invalid(format!(
                        "node {} has a negative or non-finite demand",
                        node.id
                    )));
                }
            }
            if !(node.prob.is_finite() && node.prob > S::zero() && node.prob <= S::one()) {
                return Err(Error::Invalid(format!("node {} has probability out of (0, 1]", node.id)));
            }
            match node.parent {
                None => {
                    if node.id != 0 || node.stage != 0 {
                        return Err(Error::Invalid("only node 0 at depth 0 may lack a parent".into()));
                    }
                    if !node.rates.is_empty() {
                        return Err(Error::Invalid("root must not carry growth rates".into()));
                    }
                }
                Some(p) => {
                    if p >= node.id {
                        return Err(Error::Invalid(format!(
                            "node {} lists a parent {} that does not precede it",
                            node.id, p
                        )));
                    }
                    if self.nodes[p].stage + 1 != node.stage {
                        return Err(Error::Invalid(format!(
                            "node {} at depth {} has parent at depth {}",
                            node.id, node.stage, self.nodes[p].stage
                        )));
                    }
                    if node.rates.len() != n {
                        return Err(Error::Invalid(format!(
                            "node {} has {} rates, expected {}",
                            node.id,
                            node.rates.len(),
                            n
                        )));
                    }
                    for (i, (d, r)) in node.demands.iter().zip(&node.rates).enumerate() {
                        let want = self.nodes[p].demands[i] * (S::one() + *r);
                        let scale = S::one().max(want.abs());
                        if (*d - want).abs() > real::<S>(1e-9) * scale {
                            return Err(Error::Invalid(format!(
                                "node {} demand {} does not match parent demand times growth",
                                node.id, i
                            )));
                        }
                    }
                    child_prob[p] += node.prob;
                    has_child[p] = true;
                }
            }
        }
        for node in &self.nodes {
            if has_child[node.id] {
                if (child_prob[node.id] - S::one()).abs() > real::<S>(1e-9) {
                    return Err(Error::Invalid(format!(
                        "children of node {} have probabilities summing to {}",
                        node.id, child_prob[node.id]
                    )));
                }
            }
        }
        let deepest: Vec<usize> = self
            .nodes
            .iter()
            .filter(|nd| nd.stage == self.stages)
            .map(|nd| nd.id)
            .collect();
        if deepest.is_empty() {
            return Err(Error::Invalid("no node reaches the final depth".into()));
        }
        if self.leaves != deepest {
            return Err(Error::Invalid(
                "leaves must list exactly the deepest-level nodes in id order".into(),
            ));
        }
        for node in &self.nodes {
            if !has_child[node.id] && node.stage != self.stages {
                return Err(Error::Invalid(format!(
                    "interior node {} at depth {} has no children",
                    node.id, node.stage
                )));
            }
        }
        Ok(())
    }

    /// Parses a tree from JSON and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let tree: ScenarioTree<S> = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    /// Serializes the tree as pretty-printed JSON, deterministically.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serialization cannot fail")
    }

    /// Writes the tree to a JSON file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Loads and validates a scenario tree from a JSON file.
pub fn load_tree<S: Scalar>(path: impl AsRef<Path>) -> Result<ScenarioTree<S>> {
    let text = fs::read_to_string(&path)?;
    ScenarioTree::from_json(&text)
}
