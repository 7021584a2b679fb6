//! Size accounting: closed-form variable counts per model form and
//! encoding, checked against what the builders actually produced.
//!
//! With `I` demand nodes, `H` options, `T` years and `S` scenarios, the
//! scenario-indexed builds carry per (year, scenario) copy:
//!
//! | encoding | continuous        | binary        |
//! |----------|-------------------|---------------|
//! | cuts     | `I`               | `H`           |
//! | lifted   | `(H + 1) I`       | `H`           |
//! | bits     | `B + I`           | `B + H`       |
//!
//! where `B` is the node-summed denominator bit width. Single-trajectory
//! builds are the `S = 1` case. The expanded two-stage and node-form
//! multi-stage builds share or merge decision copies, so no closed form is
//! asserted for them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::system::{ConstraintSystem, ModelForm, Reform};

/// Size summary of a built system.
#[derive(Clone, Debug, Serialize)]
pub struct SizeReport {
    /// Model form label.
    pub form: String,
    /// Revenue encoding label.
    pub reform: String,
    /// Demand nodes.
    pub nodes: usize,
    /// Station options.
    pub options: usize,
    /// Planning years.
    pub stages: usize,
    /// Scenarios.
    pub scenarios: usize,
    /// Node-summed denominator bit width (bit encoding only).
    pub denominator_bits: Option<usize>,
    /// Binary variables actually built.
    pub binary: usize,
    /// Continuous variables actually built.
    pub continuous: usize,
    /// Linear rows actually built.
    pub linear_rows: usize,
    /// Cone rows attached.
    pub soc_rows: usize,
    /// Deferred revenue definitions (lazy cut sources).
    pub lazy_contexts: usize,
    /// Closed-form binary count, where one applies.
    pub formula_binary: Option<usize>,
    /// Closed-form continuous count, where one applies.
    pub formula_continuous: Option<usize>,
}

/// Closed-form (binary, continuous) counts for a scenario-indexed build
/// with `s_eff` scenario copies.
fn formulas(
    reform: Reform,
    nodes: usize,
    options: usize,
    stages: usize,
    s_eff: usize,
    bits: Option<usize>,
) -> Option<(usize, usize)> {
    let cells = stages * s_eff;
    match reform {
        Reform::Sgi => Some((options * cells, nodes * cells)),
        Reform::R1 => Some((options * cells, (options + 1) * nodes * cells)),
        Reform::R4 => {
            let b = bits?;
            Some(((b + options) * cells, (b + nodes) * cells))
        }
    }
}

/// Summarizes a built system and cross-checks the closed-form counts.
///
/// For single-trajectory and scenario-form builds the closed forms must
/// match the actual counts exactly; a mismatch is a builder bug and comes
/// back as an error.
pub fn size_report<S: Scalar>(sys: &ConstraintSystem<S>) -> Result<SizeReport> {
    let d = &sys.layout.dims;
    let s_eff = match sys.layout.form {
        ModelForm::Det | ModelForm::TsCompact => Some(1),
        ModelForm::MsScenario => Some(d.scenarios),
        ModelForm::TsExpanded | ModelForm::MsNode => None,
    };
    let formula = s_eff.and_then(|s| {
        formulas(sys.layout.reform, d.nodes, d.options, d.stages, s, d.r4_bits)
    });

    let binary = sys.num_binary();
    let continuous = sys.num_continuous();
    if let Some((fb, fc)) = formula {
        if fb != binary || fc != continuous {
            return Err(Error::Invalid(format!(
                "size formulas disagree with the build: formula {} binary / {} continuous, \
                 actual {} / {}",
                fb, fc, binary, continuous
            )));
        }
    }

    Ok(SizeReport {
        form: sys.layout.form.label().to_string(),
        reform: sys.layout.reform.label().to_string(),
        nodes: d.nodes,
        options: d.options,
        stages: d.stages,
        scenarios: d.scenarios,
        denominator_bits: d.r4_bits,
        binary,
        continuous,
        linear_rows: sys.rows.len(),
        soc_rows: sys.soc_rows.len(),
        lazy_contexts: sys.lazy.len(),
        formula_binary: formula.map(|(fb, _)| fb),
        formula_continuous: formula.map(|(_, fc)| fc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::build::{build_ms, build_ts, BuildOptions, MsForm, TsForm};
    use crate::instance::{compute_weights, generate_instance, GeneratorConfig};
    use crate::scenario::{build_tree, GrowthModel};

    #[test]
    fn desk_scale_reports_are_consistent() {
        let inst = generate_instance::<f64>(2, &GeneratorConfig::default()).unwrap();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.435, 0.096);
        let tree = build_tree(&model, 3, 3, &inst.base_demands(), &inst.zones(), 7).unwrap();

        for reform in [Reform::Sgi, Reform::R1, Reform::R4] {
            let opts = BuildOptions::with_reform(reform);
            let sys = build_ms(&inst, &weights, &tree, MsForm::Scenario, &opts).unwrap();
            let report = size_report(&sys).unwrap();
            assert_eq!(report.formula_binary, Some(report.binary));
            assert_eq!(report.formula_continuous, Some(report.continuous));
            assert_eq!(report.scenarios, 27);

            let compact = build_ts(&inst, &weights, &tree, TsForm::Compact, &opts).unwrap();
            let creport = size_report(&compact).unwrap();
            assert_eq!(creport.formula_binary, Some(creport.binary));
            assert_eq!(creport.formula_continuous, Some(creport.continuous));

            // No closed form for merged-decision builds, but the report
            // still carries the actual counts.
            let node = build_ms(&inst, &weights, &tree, MsForm::Node, &opts).unwrap();
            let nreport = size_report(&node).unwrap();
            assert_eq!(nreport.formula_binary, None);
            assert!(nreport.binary > 0);
        }
    }

    #[test]
    fn report_serializes_to_json() {
        let inst = generate_instance::<f64>(2, &GeneratorConfig::default()).unwrap();
        let weights = compute_weights(&inst).unwrap();
        let model = GrowthModel::uniform(0.435, 0.096);
        let tree = build_tree(&model, 2, 3, &inst.base_demands(), &inst.zones(), 7).unwrap();
        let sys = build_ts(&inst, &weights, &tree, TsForm::Compact, &BuildOptions::default()).unwrap();
        let report = size_report(&sys).unwrap();
        let json = serde_json::to_string_pretty(&report).unwrap();
        assert!(json.contains("\"form\": \"ts-compact\""));
        assert!(json.contains("\"reform\": \"sgi\""));
    }
}
