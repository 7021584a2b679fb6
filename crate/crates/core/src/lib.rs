//! Planning toolkit for multi-year charging-station rollout under uncertain
//! demand growth.
//!
//! The model: a network operator opens charging stations at candidate sites
//! over a multi-year horizon, subject to yearly construction budgets, while
//! yearly demand at each node grows at uncertain rates. Users pick a station
//! (or charge at home) by multinomial logit, so each open set captures a
//! nonlinear share of demand. The toolkit builds and solves three planning
//! models over a scenario tree of demand paths:
//!
//! * deterministic: one demand trajectory,
//! * two-stage: commit the whole rollout now against expected demands,
//! * multi-stage: let each year's decision adapt to demand observed so far.
//!
//! The fractional logit revenue is handled exactly, three ways: a lifted LP
//! reformulation, a binary-expansion reformulation, and — the workhorse — an
//! exact outer approximation by subgradient cuts on the concave revenue
//! function, separated lazily inside a small branch-and-cut solver built on
//! a dense bounded-variable simplex. Independent brute-force and dynamic
//! programming oracles verify the solvers at small scale, and experiment
//! drivers measure the value of multi-stage adaptivity.
//!
//! Everything numeric is generic over a [`Scalar`] (f32 or f64); the `f64`
//! aliases below are what the binaries use.

pub mod error;
pub mod formulation;
pub mod instance;
pub mod scalar;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Problem instance over `f64`.
pub type InstanceF64 = instance::Instance<f64>;
/// Logit weight table over `f64`.
pub type WeightTableF64 = instance::WeightTable<f64>;
/// Scenario tree over `f64`.
pub type ScenarioTreeF64 = scenario::ScenarioTree<f64>;
/// Growth model over `f64`.
pub type GrowthModelF64 = scenario::GrowthModel<f64>;
