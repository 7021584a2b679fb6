//! Problem instances: demand nodes, candidate sites, station types, logit
//! choice parameters and per-year budgets.
//!
//! A *station option* is a (site, type) pair, indexed as
//! `h = site * num_types + type` throughout the crate. Users at demand node
//! `i` choose among the open options and home charging with multinomial-logit
//! probabilities driven by the weights
//!
//! ```text
//! w[i][h] = exp(alpha[type(h)] + beta * dist(i, site(h)))       (station)
//! w0[i]   = exp(alpha_home)                                     (home)
//! ```
//!
//! so that option `h` captures `d_i * w[i][h] / (w0[i] + sum over open w)`
//! units of demand. Weights are precomputed once per instance into a
//! [`WeightTable`] and shared by the model builders, the solvers and the
//! oracles.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// Region a demand node belongs to; drives demand ranges in the generator
/// and zone-level growth draws in the scenario module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    /// Dense city-center cluster.
    Central,
    /// Outlying ring.
    Suburb,
}

/// A point of charging demand (a neighborhood, a parking garage, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandNode<S> {
    /// Dense 0-based id; equals the node's position in `Instance::nodes`.
    pub id: usize,
    /// Horizontal coordinate (km).
    pub x: S,
    /// Vertical coordinate (km).
    pub y: S,
    /// Yearly charging demand observed here before the planning horizon;
    /// scenario trees grow future demand from this value.
    pub base_demand: S,
    /// Region the node belongs to.
    pub zone: Zone,
}

/// A location where a station may be built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSite<S> {
    /// Dense 0-based id; equals the site's position in `Instance::sites`.
    pub id: usize,
    /// Horizontal coordinate (km).
    pub x: S,
    /// Vertical coordinate (km).
    pub y: S,
}

/// A station design that can be placed at a candidate site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationType<S> {
    /// Dense 0-based id; equals the type's position in `Instance::types`.
    pub id: usize,
    /// One-off cost of building a station of this type.
    pub build_cost: S,
    /// Revenue per unit of demand captured by a station of this type.
    pub unit_revenue: S,
}

/// Multinomial-logit choice parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnlParams<S> {
    /// Attractiveness constant per station type, indexed by type id.
    pub alpha_by_type: Vec<S>,
    /// Attractiveness constant of the home-charging outside option.
    pub alpha_home: S,
    /// Distance sensitivity (negative: farther stations are less
    /// attractive).
    pub beta: S,
}

/// A complete problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance<S> {
    /// Demand nodes, indexed by id.
    pub nodes: Vec<DemandNode<S>>,
    /// Candidate sites, indexed by id.
    pub sites: Vec<CandidateSite<S>>,
    /// Station types, indexed by id.
    pub types: Vec<StationType<S>>,
    /// Choice-model parameters.
    pub mnl: MnlParams<S>,
    /// Per-year construction budgets; length equals `horizon`.
    pub budgets: Vec<S>,
    /// Number of planning years.
    pub horizon: usize,
    /// Stations already open before year one, as (site, type) pairs.
    #[serde(default)]
    pub preexisting: Vec<(usize, usize)>,
    /// Optional node-to-site distances overriding Euclidean distances;
    /// `distance_matrix[i][j]` is the distance from node `i` to site `j`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_matrix: Option<Vec<Vec<S>>>,
}

/// Precomputed logit weights for one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable<S> {
    /// Station weights: `w[i][h]` for node `i` and option `h`.
    pub w: Vec<Vec<S>>,
    /// Home-charging weights per node.
    pub w_home: Vec<S>,
    /// Node-to-site distances actually used (matrix override or Euclidean).
    pub dist: Vec<Vec<S>>,
}

impl<S: Scalar> Instance<S> {
    /// Number of demand nodes.
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of candidate sites.
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    /// Number of station types.
    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    /// Number of station options, `|sites| * |types|`.
    pub fn num_options(&self) -> usize {
        self.sites.len() * self.types.len()
    }

    /// Option index of a (site, type) pair.
    pub fn option_index(&self, site: usize, station_type: usize) -> usize {
        site * self.types.len() + station_type
    }

    /// Site id of option `h`.
    pub fn option_site(&self, h: usize) -> usize {
        h / self.types.len()
    }

    /// Type id of option `h`.
    pub fn option_type(&self, h: usize) -> usize {
        h % self.types.len()
    }

    /// Build cost of option `h`.
    pub fn option_cost(&self, h: usize) -> S {
        self.types[self.option_type(h)].build_cost
    }

    /// Unit revenue of option `h`.
    pub fn option_revenue(&self, h: usize) -> S {
        self.types[self.option_type(h)].unit_revenue
    }

    /// Unit revenue of every option, indexed by `h`.
    pub fn option_revenues(&self) -> Vec<S> {
        (0..self.num_options()).map(|h| self.option_revenue(h)).collect()
    }

    /// Build cost of every option, indexed by `h`.
    pub fn option_costs(&self) -> Vec<S> {
        (0..self.num_options()).map(|h| self.option_cost(h)).collect()
    }

    /// Open/closed vector over options implied by `preexisting`.
    pub fn preexisting_open(&self) -> Vec<bool> {
        let mut open = vec![false; self.num_options()];
        for &(j, k) in &self.preexisting {
            open[self.option_index(j, k)] = true;
        }
        open
    }

    /// Base demand of every node, indexed by node id.
    pub fn base_demands(&self) -> Vec<S> {
        self.nodes.iter().map(|n| n.base_demand).collect()
    }

    /// Zone of every node, indexed by node id.
    pub fn zones(&self) -> Vec<Zone> {
        self.nodes.iter().map(|n| n.zone).collect()
    }

    /// Distance from node `i` to site `j`: the matrix entry if an override
    /// is present, the Euclidean distance otherwise.
    pub fn distance(&self, i: usize, j: usize) -> S {
        if let Some(m) = &self.distance_matrix {
            return m[i][j];
        }
        let n = &self.nodes[i];
        let s = &self.sites[j];
        let dx = n.x - s.x;
        let dy = n.y - s.y;
        (dx * dx + dy * dy).sqrt()
    }

    /// Checks every structural invariant, returning the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() || self.sites.is_empty() || self.types.is_empty() {
            return Err(Error::Invalid(
                "instance needs at least one node, site and type".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::Invalid("horizon must be at least one year".into()));
        }
        if self.budgets.len() != self.horizon {
            return Err(Error::Invalid(format!(
                "budget/horizon mismatch: {} budgets for a {}-year horizon",
                self.budgets.len(),
                self.horizon
            )));
        }
        for (pos, n) in self.nodes.iter().enumerate() {
            if n.id != pos {
                return Err(Error::Invalid(format!(
                    "node ids must be dense 0-based; found id {} at position {}",
                    n.id, pos
                )));
            }
            if !(n.base_demand.is_finite() && n.base_demand >= S::zero()) {
                return Err(Error::Invalid(format!(
                    "node {} has non-finite or negative base demand",
                    n.id
                )));
            }
            if !(n.x.is_finite() && n.y.is_finite()) {
                return Err(Error::Invalid(format!("node {} has non-finite coordinates", n.id)));
            }
        }
        for (pos, s) in self.sites.iter().enumerate() {
            if s.id != pos {
                return Err(Error::Invalid(format!(
                    "site ids must be dense 0-based; found id {} at position {}",
                    s.id, pos
                )));
            }
            if !(s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::Invalid(format!("site {} has non-finite coordinates", s.id)));
            }
        }
        for (pos, t) in self.types.iter().enumerate() {
            if t.id != pos {
                return Err(Error::Invalid(format!(
                    "type ids must be dense 0-based; found id {} at position {}",
                    t.id, pos
                )));
            }
            if !(t.build_cost.is_finite() && t.build_cost > S::zero()) {
                return Err(Error::Invalid(format!(
                    "type {} must have a positive, finite build cost",
                    t.id
                )));
            }
            if !(t.unit_revenue.is_finite() && t.unit_revenue >= S::zero()) {
                return Err(Error::Invalid(format!(
                    "type {} must have a nonnegative, finite unit revenue",
                    t.id
                )));
            }
        }
        if self.mnl.alpha_by_type.len() != self.types.len() {
            return Err(Error::Invalid(format!(
                "alpha_by_type has {} entries for {} station types",
                self.mnl.alpha_by_type.len(),
                self.types.len()
            )));
        }
        for a in &self.mnl.alpha_by_type {
            if !a.is_finite() {
                return Err(Error::Invalid("alpha_by_type entries must be finite".into()));
            }
        }
        if !(self.mnl.alpha_home.is_finite() && self.mnl.beta.is_finite()) {
            return Err(Error::Invalid("alpha_home and beta must be finite".into()));
        }
        for (t, b) in self.budgets.iter().enumerate() {
            if !(b.is_finite() && *b >= S::zero()) {
                return Err(Error::Invalid(format!(
                    "budget for year {} must be nonnegative and finite",
                    t + 1
                )));
            }
        }
        for &(j, k) in &self.preexisting {
            if j >= self.sites.len() || k >= self.types.len() {
                return Err(Error::Invalid(format!(
                    "preexisting station ({}, {}) references an unknown site or type",
                    j, k
                )));
            }
        }
        if let Some(m) = &self.distance_matrix {
            if m.len() != self.nodes.len() {
                return Err(Error::Invalid(format!(
                    "distance matrix has {} rows for {} nodes",
                    m.len(),
                    self.nodes.len()
                )));
            }
            for (i, row) in m.iter().enumerate() {
                if row.len() != self.sites.len() {
                    return Err(Error::Invalid(format!(
                        "distance matrix row {} has {} entries for {} sites",
                        i,
                        row.len(),
                        self.sites.len()
                    )));
                }
                for d in row {
                    if !(d.is_finite() && *d >= S::zero()) {
                        return Err(Error::Invalid(format!(
                            "distance matrix row {} has a negative or non-finite entry",
                            i
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parses an instance from its JSON representation and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance<S> = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    /// Serializes the instance as pretty-printed JSON. Serialization is
    /// deterministic: field order is fixed and floats use the shortest
    /// round-trip representation.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }

    /// Writes the instance to a JSON file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Loads and validates an instance from a JSON file.
pub fn load_instance<S: Scalar>(path: impl AsRef<Path>) -> Result<Instance<S>> {
    let text = fs::read_to_string(&path)?;
    Instance::from_json(&text)
}

/// Knobs for the synthetic-instance generator.
///
/// The generated city has a Gaussian central cluster and a uniform suburban
/// ring. Station types interpolate between a small design (cheap, low
/// revenue) and a large one; each year's budget is a fixed multiple of the
/// largest build cost.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Number of demand nodes.
    pub nodes: usize,
    /// Number of candidate sites.
    pub sites: usize,
    /// Number of station types.
    pub station_types: usize,
    /// Number of planning years.
    pub horizon: usize,
    /// Fraction of nodes placed in the central cluster.
    pub central_frac: f64,
    /// Base-demand range for central nodes.
    pub central_demand: (f64, f64),
    /// Base-demand range for suburban nodes.
    pub suburb_demand: (f64, f64),
    /// Build cost of the smallest and largest station type.
    pub cost_range: (f64, f64),
    /// Unit revenue of the smallest and largest station type.
    pub revenue_range: (f64, f64),
    /// Yearly budget as a multiple of the largest build cost.
    pub budget_factor: f64,
    /// Attractiveness of the smallest and largest station type.
    pub alpha_range: (f64, f64),
    /// Attractiveness of home charging.
    pub alpha_home: f64,
    /// Distance sensitivity of the choice model.
    pub beta: f64,
}

impl Default for GeneratorConfig {
    /// Desk-scale defaults: 20 nodes, 6 sites, 2 types, 3 years.
    fn default() -> Self {
        GeneratorConfig {
            nodes: 20,
            sites: 6,
            station_types: 2,
            horizon: 3,
            central_frac: 0.6,
            central_demand: (8.0, 16.0),
            suburb_demand: (3.0, 9.0),
            cost_range: (50.0, 120.0),
            revenue_range: (1.0, 1.8),
            budget_factor: 1.25,
            alpha_range: (0.0, 0.5),
            alpha_home: 0.0,
            beta: -0.63,
        }
    }
}

impl GeneratorConfig {
    /// Reference dimensions used for size reporting: 58 nodes, 10 sites,
    /// 2 types, 4 years.
    pub fn reference() -> Self {
        GeneratorConfig {
            nodes: 58,
            sites: 10,
            station_types: 2,
            horizon: 4,
            ..GeneratorConfig::default()
        }
    }
}

fn lerp(range: (f64, f64), frac: f64) -> f64 {
    range.0 + (range.1 - range.0) * frac
}

/// Generates a synthetic instance. The same seed and config always produce
/// the same instance, byte for byte.
///
/// Central nodes are drawn from an isotropic Gaussian around the origin;
/// suburban nodes sit on a ring 3.5-7 km out. Half the sites (rounded up)
/// are placed centrally, the rest in the ring.
pub fn generate_instance<S: Scalar>(seed: u64, config: &GeneratorConfig) -> Result<Instance<S>> {
    if config.nodes == 0 || config.sites == 0 || config.station_types == 0 || config.horizon == 0 {
        return Err(Error::Invalid(
            "generator config dimensions must all be at least one".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cluster = Normal::new(0.0, 1.3).expect("valid normal");

    let n_central = ((config.nodes as f64 * config.central_frac).round() as usize).min(config.nodes);
    let mut nodes = Vec::with_capacity(config.nodes);
    for id in 0..config.nodes {
        let (x, y, demand) = if id < n_central {
            let x: f64 = cluster.sample(&mut rng);
            let y: f64 = cluster.sample(&mut rng);
            let d = rng.random_range(config.central_demand.0..=config.central_demand.1);
            (x, y, d)
        } else {
            let r = rng.random_range(3.5..=7.0);
            let theta = rng.random_range(0.0..TAU);
            let d = rng.random_range(config.suburb_demand.0..=config.suburb_demand.1);
            (r * theta.cos(), r * theta.sin(), d)
        };
        nodes.push(DemandNode {
            id,
            x: real(x),
            y: real(y),
            base_demand: real(demand),
            zone: if id < n_central { Zone::Central } else { Zone::Suburb },
        });
    }

    let n_core = config.sites.div_ceil(2);
    let mut sites = Vec::with_capacity(config.sites);
    for id in 0..config.sites {
        let r = if id < n_core {
            rng.random_range(0.5..=2.5)
        } else {
            rng.random_range(3.0..=6.5)
        };
        let theta = rng.random_range(0.0..TAU);
        sites.push(CandidateSite {
            id,
            x: real(r * theta.cos()),
            y: real(r * theta.sin()),
        });
    }

    let mut types = Vec::with_capacity(config.station_types);
    let mut alpha_by_type = Vec::with_capacity(config.station_types);
    for id in 0..config.station_types {
        let frac = if config.station_types == 1 {
            0.0
        } else {
            id as f64 / (config.station_types - 1) as f64
        };
        types.push(StationType {
            id,
            build_cost: real(lerp(config.cost_range, frac)),
            unit_revenue: real(lerp(config.revenue_range, frac)),
        });
        alpha_by_type.push(real(lerp(config.alpha_range, frac)));
    }

    let yearly_budget = config.budget_factor * config.cost_range.0.max(config.cost_range.1);
    let inst = Instance {
        nodes,
        sites,
        types,
        mnl: MnlParams {
            alpha_by_type,
            alpha_home: real(config.alpha_home),
            beta: real(config.beta),
        },
        budgets: vec![real(yearly_budget); config.horizon],
        horizon: config.horizon,
        preexisting: Vec::new(),
        distance_matrix: None,
    };
    inst.validate()?;
    Ok(inst)
}

/// Largest exp() argument accepted when computing weights; beyond this the
/// weight would overflow or underflow to a degenerate value in f64.
pub const MAX_EXP_ARG: f64 = 700.0;

/// Computes the logit weight table for an instance.
///
/// Fails with [`Error::WeightOverflow`] if any exponent
/// `alpha[k] + beta * dist(i, j)` (or `alpha_home`) falls outside
/// `[-700, 700]`.
pub fn compute_weights<S: Scalar>(inst: &Instance<S>) -> Result<WeightTable<S>> {
    let home_arg = inst
        .mnl
        .alpha_home
        .to_f64()
        .expect("scalar converts to f64");
    if home_arg.abs() > MAX_EXP_ARG {
        return Err(Error::Invalid(format!(
            "alpha_home {} out of range [-700, 700]",
            home_arg
        )));
    }
    let num_opts = inst.num_options();
    let mut w = Vec::with_capacity(inst.num_nodes());
    let mut dist = Vec::with_capacity(inst.num_nodes());
    for i in 0..inst.num_nodes() {
        let mut row = Vec::with_capacity(num_opts);
        let mut drow = Vec::with_capacity(inst.num_sites());
        for j in 0..inst.num_sites() {
            drow.push(inst.distance(i, j));
        }
        for h in 0..num_opts {
            let j = inst.option_site(h);
            let k = inst.option_type(h);
            let arg = inst.mnl.alpha_by_type[k] + inst.mnl.beta * drow[j];
            let arg_f = arg.to_f64().expect("scalar converts to f64");
            if !arg_f.is_finite() || arg_f.abs() > MAX_EXP_ARG {
                return Err(Error::WeightOverflow {
                    node: i,
                    site: j,
                    station_type: k,
                    arg: arg_f,
                });
            }
            row.push(arg.exp());
        }
        w.push(row);
        dist.push(drow);
    }
    let w_home = vec![inst.mnl.alpha_home.exp(); inst.num_nodes()];
    Ok(WeightTable { w, w_home, dist })
}

/// Probability that a user at node `i` charges at option `h`, given the
/// open/closed vector. Closed options have probability zero; the remaining
/// mass `w_home / denom` goes to home charging.
pub fn choice_probability<S: Scalar>(
    weights: &WeightTable<S>,
    open: &[bool],
    i: usize,
    h: usize,
) -> S {
    if !open[h] {
        return S::zero();
    }
    let row = &weights.w[i];
    let mut denom = weights.w_home[i];
    for (wh, &o) in row.iter().zip(open) {
        if o {
            denom += *wh;
        }
    }
    row[h] / denom
}

/// Revenue per unit of demand at node `i` under the given open set:
/// `sum over open h of r[h] * p[i][h]`.
pub fn capture_rate<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    open: &[bool],
    i: usize,
) -> S {
    let row = &weights.w[i];
    let mut denom = weights.w_home[i];
    let mut num = S::zero();
    for (h, (wh, &o)) in row.iter().zip(open).enumerate() {
        if o {
            denom += *wh;
            num += *wh * inst.option_revenue(h);
        }
    }
    num / denom
}

/// Expected one-year revenue of an open set under the given node demands:
/// `sum over i of d[i] * capture_rate(i)`.
pub fn stage_revenue<S: Scalar>(
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    open: &[bool],
    demands: &[S],
) -> S {
    assert_eq!(demands.len(), inst.num_nodes(), "one demand per node");
    assert_eq!(open.len(), inst.num_options(), "one flag per option");
    (0..inst.num_nodes())
        .map(|i| demands[i] * capture_rate(inst, weights, open, i))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One node at the origin, one site `dist` km away, `n_types` types with
    /// unit revenues `revs`, all alphas zero unless set.
    fn tiny(dist: f64, revs: &[f64], beta: f64) -> Instance<f64> {
        Instance {
            nodes: vec![DemandNode {
                id: 0,
                x: 0.0,
                y: 0.0,
                base_demand: 1.0,
                zone: Zone::Central,
            }],
            sites: vec![CandidateSite { id: 0, x: dist, y: 0.0 }],
            types: revs
                .iter()
                .enumerate()
                .map(|(id, &r)| StationType {
                    id,
                    build_cost: 10.0,
                    unit_revenue: r,
                })
                .collect(),
            mnl: MnlParams {
                alpha_by_type: vec![0.0; revs.len()],
                alpha_home: 0.0,
                beta,
            },
            budgets: vec![100.0],
            horizon: 1,
            preexisting: Vec::new(),
            distance_matrix: None,
        }
    }

    #[test]
    fn option_indexing_round_trips() {
        let inst = generate_instance::<f64>(7, &GeneratorConfig::default()).unwrap();
        assert_eq!(inst.num_options(), 12);
        for h in 0..inst.num_options() {
            assert_eq!(inst.option_index(inst.option_site(h), inst.option_type(h)), h);
        }
        // h = site * num_types + type with types contiguous per site.
        assert_eq!(inst.option_index(2, 1), 5);
    }

    #[test]
    fn budget_horizon_mismatch_is_reported() {
        let mut inst = tiny(1.0, &[1.0], 0.0);
        inst.budgets = vec![100.0, 100.0];
        let err = inst.validate().unwrap_err();
        assert!(err.to_string().contains("budget/horizon mismatch"), "{}", err);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let inst = generate_instance::<f64>(42, &GeneratorConfig::default()).unwrap();
        let back = Instance::<f64>::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let cfg = GeneratorConfig::default();
        let a = generate_instance::<f64>(11, &cfg).unwrap();
        let b = generate_instance::<f64>(11, &cfg).unwrap();
        let c = generate_instance::<f64>(12, &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn generator_honors_dimensions_and_zones() {
        let cfg = GeneratorConfig::reference();
        let inst = generate_instance::<f64>(5, &cfg).unwrap();
        assert_eq!(inst.num_nodes(), 58);
        assert_eq!(inst.num_sites(), 10);
        assert_eq!(inst.num_types(), 2);
        assert_eq!(inst.num_options(), 20);
        assert_eq!(inst.horizon, 4);
        assert_eq!(inst.budgets.len(), 4);
        let central = inst.nodes.iter().filter(|n| n.zone == Zone::Central).count();
        assert_eq!(central, 35); // round(58 * 0.6)
        // Large type costs more and earns more than small.
        assert!(inst.types[1].build_cost > inst.types[0].build_cost);
        assert!(inst.types[1].unit_revenue > inst.types[0].unit_revenue);
    }

    #[test]
    fn weights_match_direct_evaluation() {
        // dist = 1, alpha = 0: w = exp(beta).
        let w = compute_weights(&tiny(1.0, &[1.0], -0.63)).unwrap();
        assert!((w.w[0][0] - 0.5325918010068972).abs() < 1e-15);
        assert!((w.w_home[0] - 1.0).abs() < 1e-15);

        let w = compute_weights(&tiny(1.0, &[1.0], -0.063)).unwrap();
        assert!((w.w[0][0] - 0.9389434736891332).abs() < 1e-15);

        // Flat model: every weight is one.
        let w = compute_weights(&tiny(3.7, &[1.0, 2.0], 0.0)).unwrap();
        assert_eq!(w.w[0], vec![1.0, 1.0]);
    }

    #[test]
    fn weight_overflow_is_caught_with_location() {
        let mut inst = tiny(2.0, &[1.0], -400.0);
        inst.mnl.alpha_by_type[0] = 0.0;
        let err = compute_weights(&inst).unwrap_err();
        match err {
            Error::WeightOverflow { node, site, station_type, arg } => {
                assert_eq!((node, site, station_type), (0, 0, 0));
                assert_eq!(arg, -800.0);
            }
            other => panic!("expected WeightOverflow, got {}", other),
        }
    }

    #[test]
    fn distance_matrix_overrides_euclidean() {
        let mut inst = tiny(1.0, &[1.0], -1.0);
        assert_eq!(inst.distance(0, 0), 1.0);
        inst.distance_matrix = Some(vec![vec![2.5]]);
        inst.validate().unwrap();
        assert_eq!(inst.distance(0, 0), 2.5);
        let w = compute_weights(&inst).unwrap();
        assert!((w.w[0][0] - (-2.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn choice_probability_examples() {
        // Two equal options, home weight 1: open one -> p = 1/2.
        let inst = tiny(0.0, &[1.0, 1.0], 0.0);
        let w = compute_weights(&inst).unwrap();
        assert_eq!(choice_probability(&w, &[false, false], 0, 0), 0.0);
        assert!((choice_probability(&w, &[true, false], 0, 0) - 0.5).abs() < 1e-15);
        // Open both: each gets 1/3.
        let p = choice_probability(&w, &[true, true], 0, 1);
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn choice_probabilities_sum_below_one_and_cannibalize() {
        let inst = generate_instance::<f64>(3, &GeneratorConfig::default()).unwrap();
        let w = compute_weights(&inst).unwrap();
        let h_count = inst.num_options();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let open: Vec<bool> = (0..h_count).map(|_| rng.random_range(0..2) == 1).collect();
            for i in 0..inst.num_nodes() {
                let total: f64 = (0..h_count).map(|h| choice_probability(&w, &open, i, h)).sum();
                assert!(total <= 1.0 + 1e-12, "station shares exceed one");
                // Opening one more station strictly lowers existing shares.
                if let Some(closed) = open.iter().position(|o| !o) {
                    if let Some(already) = open.iter().position(|o| *o) {
                        let mut wider = open.clone();
                        wider[closed] = true;
                        let before = choice_probability(&w, &open, i, already);
                        let after = choice_probability(&w, &wider, i, already);
                        assert!(after < before, "adding a station must cannibalize");
                    }
                }
            }
        }
    }

    #[test]
    fn stage_revenue_examples() {
        // Nothing open earns nothing.
        let inst = tiny(0.0, &[10.0, 4.0], 0.0);
        let w = compute_weights(&inst).unwrap();
        assert_eq!(stage_revenue(&inst, &w, &[false, false], &[1.0]), 0.0);
        // One option, equal weights: half the demand is captured.
        assert!((stage_revenue(&inst, &w, &[true, false], &[1.0]) - 5.0).abs() < 1e-15);
        // Both open: (10 + 4) / 3.
        let r = stage_revenue(&inst, &w, &[true, true], &[1.0]);
        assert!((r - 14.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stage_revenue_is_linear_in_demand() {
        let inst = generate_instance::<f64>(8, &GeneratorConfig::default()).unwrap();
        let w = compute_weights(&inst).unwrap();
        let open = vec![true; inst.num_options()];
        let d1 = inst.base_demands();
        let d2: Vec<f64> = d1.iter().map(|d| d * 3.0).collect();
        let r1 = stage_revenue(&inst, &w, &open, &d1);
        let r2 = stage_revenue(&inst, &w, &open, &d2);
        assert!((r2 - 3.0 * r1).abs() < 1e-9 * r1.abs());
    }

    #[test]
    fn works_at_f32() {
        let cfg = GeneratorConfig::default();
        let inst = generate_instance::<f32>(11, &cfg).unwrap();
        let w = compute_weights(&inst).unwrap();
        let open = vec![true; inst.num_options()];
        let r = stage_revenue(&inst, &w, &open, &inst.base_demands());
        assert!(r.is_finite() && r > 0.0);
    }
}
