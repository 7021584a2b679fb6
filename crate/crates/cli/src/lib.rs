//! Experiment drivers behind the `chargeplan` binary.

pub mod commands;
