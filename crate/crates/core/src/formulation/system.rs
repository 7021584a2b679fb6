//! In-memory representation of a built optimization model: variables,
//! linear rows, optional second-order-cone rows, an objective, and deferred
//! revenue definitions for lazy cut separation.

use std::fmt::Write as _;

use crate::scalar::{real, Scalar};
use crate::solver::qeval::QEvaluator;

/// Index of a variable within one [`ConstraintSystem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Integrality class of a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    /// Takes values in {0, 1} (relaxed to its bounds inside LP solves).
    Binary,
    /// Takes any value within its bounds.
    Continuous,
}

/// What a variable stands for; drives plan extraction and LP export names.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarTag {
    /// `x`: option `option` is open in decision context `ctx`.
    Open {
        /// Index into the layout's decision contexts.
        ctx: usize,
        /// Station option `h`.
        option: usize,
    },
    /// `q`: captured revenue of revenue context `rev` (cut formulation).
    Revenue {
        /// Index into the layout's revenue contexts.
        rev: usize,
    },
    /// `y`: reciprocal of the logit denominator (lifted formulation).
    Reciprocal {
        /// Index into the layout's revenue contexts.
        rev: usize,
    },
    /// `g = x * y` linearization product (lifted formulation).
    Product {
        /// Index into the layout's revenue contexts.
        rev: usize,
        /// Station option `h`.
        option: usize,
    },
    /// `z`: captured revenue of revenue context `rev` (bit formulation).
    Ratio {
        /// Index into the layout's revenue contexts.
        rev: usize,
    },
    /// `u`: one bit of the integer-scaled denominator (bit formulation).
    Bit {
        /// Index into the layout's revenue contexts.
        rev: usize,
        /// Bit position.
        bit: usize,
    },
    /// `v = z * u` linearization product (bit formulation).
    BitProduct {
        /// Index into the layout's revenue contexts.
        rev: usize,
        /// Bit position.
        bit: usize,
    },
}

impl VarTag {
    /// Short unique name for LP export.
    pub fn name(&self) -> String {
        match self {
            VarTag::Open { ctx, option } => format!("x_d{}_o{}", ctx, option),
            VarTag::Revenue { rev } => format!("q_r{}", rev),
            VarTag::Reciprocal { rev } => format!("y_r{}", rev),
            VarTag::Product { rev, option } => format!("g_r{}_o{}", rev, option),
            VarTag::Ratio { rev } => format!("z_r{}", rev),
            VarTag::Bit { rev, bit } => format!("u_r{}_b{}", rev, bit),
            VarTag::BitProduct { rev, bit } => format!("v_r{}_b{}", rev, bit),
        }
    }
}

/// One variable: kind, bounds and meaning.
#[derive(Clone, Debug)]
pub struct VarDef<S> {
    /// Integrality class.
    pub kind: VarKind,
    /// Lower bound.
    pub lb: S,
    /// Upper bound.
    pub ub: S,
    /// Meaning.
    pub tag: VarTag,
}

/// Comparison sense of a linear row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    /// Less-or-equal.
    Le,
    /// Greater-or-equal.
    Ge,
    /// Equality.
    Eq,
}

/// A linear constraint `terms (sense) rhs`.
#[derive(Clone, Debug)]
pub struct LinRow<S> {
    /// Sparse coefficients, at most one entry per variable.
    pub terms: Vec<(VarId, S)>,
    /// Comparison sense.
    pub sense: Sense,
    /// Right-hand side.
    pub rhs: S,
}

impl<S: Scalar> LinRow<S> {
    /// Left-hand-side value at a point.
    pub fn lhs_at(&self, values: &[S]) -> S {
        self.terms.iter().map(|(v, c)| *c * values[v.0]).sum()
    }

    /// How far the point is from satisfying the row (0 when feasible).
    pub fn violation(&self, values: &[S]) -> S {
        let lhs = self.lhs_at(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(S::zero()),
            Sense::Ge => (self.rhs - lhs).max(S::zero()),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// An affine expression `terms + constant`.
#[derive(Clone, Debug)]
pub struct AffExpr<S> {
    /// Sparse coefficients.
    pub terms: Vec<(VarId, S)>,
    /// Constant offset.
    pub constant: S,
}

impl<S: Scalar> AffExpr<S> {
    /// A constant expression.
    pub fn constant(c: S) -> Self {
        AffExpr { terms: Vec::new(), constant: c }
    }

    /// Value at a point.
    pub fn eval(&self, values: &[S]) -> S {
        self.constant + self.terms.iter().map(|(v, c)| *c * values[v.0]).sum()
    }
}

/// A second-order-cone row `|| vector ||_2 <= rhs`, each entry affine.
#[derive(Clone, Debug)]
pub struct SocRow<S> {
    /// Entries of the cone vector.
    pub vector: Vec<AffExpr<S>>,
    /// Right-hand side expression.
    pub rhs: AffExpr<S>,
}

impl<S: Scalar> SocRow<S> {
    /// `rhs - ||vector||` at a point; nonnegative when feasible.
    pub fn residual(&self, values: &[S]) -> S {
        let norm2: S = self
            .vector
            .iter()
            .map(|e| {
                let v = e.eval(values);
                v * v
            })
            .sum();
        self.rhs.eval(values) - norm2.sqrt()
    }
}

/// Maximization objective `max terms . vars`.
#[derive(Clone, Debug, Default)]
pub struct Objective<S> {
    /// Sparse coefficients; every model here maximizes.
    pub terms: Vec<(VarId, S)>,
}

impl<S: Scalar> Objective<S> {
    /// Objective value at a point.
    pub fn value(&self, values: &[S]) -> S {
        self.terms.iter().map(|(v, c)| *c * values[v.0]).sum()
    }
}

/// A deferred revenue definition: the variable `q` must satisfy
/// `q <= Q(x)` for the context's evaluator, enforced by tangent cuts
/// separated during the solve instead of rows added up front.
#[derive(Clone, Debug)]
pub struct LazyRevenue<S> {
    /// Index into the layout's revenue contexts.
    pub rev: usize,
    /// The revenue variable.
    pub q: VarId,
    /// The open variables of the owning decision context, in option order.
    pub x: Vec<VarId>,
    /// Exact evaluator for this context.
    pub eval: QEvaluator<S>,
}

/// Which planning model a system encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelForm {
    /// One fixed demand trajectory.
    Det,
    /// Two-stage on expected demands (one compact trajectory).
    TsCompact,
    /// Two-stage with per-scenario revenue terms and shared decisions.
    TsExpanded,
    /// Multi-stage with decisions on tree nodes.
    MsNode,
    /// Multi-stage with per-scenario decision copies tied by
    /// non-anticipativity rows.
    MsScenario,
}

impl ModelForm {
    /// Short label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            ModelForm::Det => "det",
            ModelForm::TsCompact => "ts-compact",
            ModelForm::TsExpanded => "ts-expanded",
            ModelForm::MsNode => "ms-node",
            ModelForm::MsScenario => "ms-scenario",
        }
    }
}

/// How the fractional revenue terms are encoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reform {
    /// Deferred tangent cuts on the concave revenue extension, separated
    /// lazily (the workhorse).
    Sgi,
    /// Lifted reciprocal linearization: one `y = 1 / denominator` variable
    /// and one product variable per option, tied by McCormick rows.
    R1,
    /// Binary expansion of the integer-scaled denominator with products
    /// linearized bit by bit.
    R4,
}

impl Reform {
    /// Short label used in reports and CLI flags.
    pub fn label(&self) -> &'static str {
        match self {
            Reform::Sgi => "sgi",
            Reform::R1 => "r1",
            Reform::R4 => "r4",
        }
    }
}

/// One decision context: a point where a year's open set is chosen.
#[derive(Clone, Debug)]
pub struct DecisionCtx {
    /// Year whose open set this decides (1-based).
    pub stage: usize,
    /// Scenario the copy belongs to (scenario-form models only).
    pub scenario: Option<usize>,
    /// Tree node the decision is measurable with respect to, when known.
    pub tree_node: Option<usize>,
    /// Preceding decision context (the year-before state), if any.
    pub pred: Option<usize>,
}

/// One revenue context: a (demand node, year[, scenario]) cell whose
/// captured revenue enters the objective.
#[derive(Clone, Debug)]
pub struct RevenueCtx<S> {
    /// Demand node.
    pub node: usize,
    /// Owning decision context.
    pub decision: usize,
    /// Year (1-based).
    pub stage: usize,
    /// Scenario, for per-scenario revenue terms.
    pub scenario: Option<usize>,
    /// Scenario-tree node the demands come from, when built from a tree.
    pub tree_node: Option<usize>,
    /// Demand of the node in this context.
    pub demand: S,
    /// Objective weight (scenario probability, or 1).
    pub weight: S,
}

/// Model dimensions a system was built from.
#[derive(Clone, Copy, Debug)]
pub struct Dims {
    /// Demand nodes.
    pub nodes: usize,
    /// Station options.
    pub options: usize,
    /// Planning years.
    pub stages: usize,
    /// Scenarios (1 for single-trajectory models).
    pub scenarios: usize,
    /// Total denominator bits across demand nodes (bit formulation only).
    pub r4_bits: Option<usize>,
}

/// Structural map of a built system: which model, which encoding, and how
/// variables group into contexts.
#[derive(Clone, Debug)]
pub struct SystemLayout<S> {
    /// Model form.
    pub form: ModelForm,
    /// Revenue encoding.
    pub reform: Reform,
    /// Dimensions.
    pub dims: Dims,
    /// Decision contexts in variable order.
    pub decisions: Vec<DecisionCtx>,
    /// Revenue contexts in variable order.
    pub revenues: Vec<RevenueCtx<S>>,
    /// Open variables: `x[ctx][option]`.
    pub x: Vec<Vec<VarId>>,
}

/// A built model ready for a solver: variables, rows, objective, and any
/// deferred parts (cone rows, lazy revenue definitions).
#[derive(Clone, Debug)]
pub struct ConstraintSystem<S> {
    /// Variables in column order.
    pub vars: Vec<VarDef<S>>,
    /// Linear rows.
    pub rows: Vec<LinRow<S>>,
    /// Second-order-cone rows (only after an explicit conic attach).
    pub soc_rows: Vec<SocRow<S>>,
    /// Maximization objective.
    pub objective: Objective<S>,
    /// Deferred revenue definitions for lazy separation.
    pub lazy: Vec<LazyRevenue<S>>,
    /// Exact revenue evaluators, aligned with `layout.revenues`. Present in
    /// every encoding, so incumbent values can always be recomputed from the
    /// open decisions alone.
    pub evaluators: Vec<QEvaluator<S>>,
    /// Structural map.
    pub layout: SystemLayout<S>,
}

impl<S: Scalar> ConstraintSystem<S> {
    /// Adds a binary variable with bounds `[0, 1]`; returns its id.
    pub fn add_binary(&mut self, tag: VarTag) -> VarId {
        self.add_var(VarKind::Binary, S::zero(), S::one(), tag)
    }

    /// Adds a continuous variable; returns its id.
    pub fn add_continuous(&mut self, lb: S, ub: S, tag: VarTag) -> VarId {
        self.add_var(VarKind::Continuous, lb, ub, tag)
    }

    fn add_var(&mut self, kind: VarKind, lb: S, ub: S, tag: VarTag) -> VarId {
        debug_assert!(lb <= ub, "variable bounds must be ordered");
        let id = VarId(self.vars.len());
        self.vars.push(VarDef { kind, lb, ub, tag });
        id
    }

    /// Number of binary variables.
    pub fn num_binary(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Number of continuous variables.
    pub fn num_continuous(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Continuous).count()
    }

    /// Largest violation of any linear row or bound at a point.
    pub fn max_violation(&self, values: &[S]) -> S {
        let mut worst = S::zero();
        for row in &self.rows {
            worst = worst.max(row.violation(values));
        }
        for (def, v) in self.vars.iter().zip(values) {
            worst = worst.max(def.lb - *v).max(*v - def.ub);
        }
        worst
    }

    /// Largest violation of any cone row at a point (0 when all feasible).
    pub fn max_soc_violation(&self, values: &[S]) -> S {
        self.soc_rows
            .iter()
            .map(|r| (-r.residual(values)).max(S::zero()))
            .fold(S::zero(), S::max)
    }

    /// Exports the linear part in LP text format. Cone rows and lazy
    /// revenue definitions cannot be expressed there; they are summarized
    /// in a leading comment instead.
    pub fn dump_lp(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "\\ {} / {}: {} vars ({} binary), {} rows, {} cone rows deferred, {} lazy revenue terms",
            self.layout.form.label(),
            self.layout.reform.label(),
            self.vars.len(),
            self.num_binary(),
            self.rows.len(),
            self.soc_rows.len(),
            self.lazy.len()
        );
        out.push_str("Maximize\n obj:");
        for (v, c) in &self.objective.terms {
            let _ = write!(out, " {:+} {}", c, self.vars[v.0].tag.name());
        }
        out.push_str("\nSubject To\n");
        for (idx, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " r{}:", idx);
            for (v, c) in &row.terms {
                let _ = write!(out, " {:+} {}", c, self.vars[v.0].tag.name());
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {} {}", op, row.rhs);
        }
        out.push_str("Bounds\n");
        for def in &self.vars {
            let _ = writeln!(out, " {} <= {} <= {}", def.lb, def.tag.name(), def.ub);
        }
        let binaries: Vec<String> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.tag.name())
            .collect();
        if !binaries.is_empty() {
            out.push_str("Binaries\n ");
            out.push_str(&binaries.join(" "));
            out.push('\n');
        }
        out.push_str("End\n");
        out
    }

    /// True when every binary variable is within `tol` of 0 or 1.
    pub fn is_integral(&self, values: &[S], tol: S) -> bool {
        self.vars.iter().zip(values).all(|(def, v)| {
            def.kind != VarKind::Binary || (*v - v.round()).abs() <= tol
        })
    }

    /// Exact expected revenue of the plan a point encodes: every open
    /// decision is rounded to 0/1 and each revenue context is evaluated
    /// exactly, independent of how the model linearized it.
    pub fn exact_objective(&self, values: &[S]) -> S {
        self.layout
            .revenues
            .iter()
            .zip(&self.evaluators)
            .map(|(ctx, eval)| {
                let open: Vec<bool> = self.layout.x[ctx.decision]
                    .iter()
                    .map(|v| values[v.0] > real(0.5))
                    .collect();
                ctx.weight * eval.value_open(&open)
            })
            .sum()
    }
}

/// Convenience constructor for tests and builders.
pub fn empty_system<S: Scalar>(layout: SystemLayout<S>) -> ConstraintSystem<S> {
    ConstraintSystem {
        vars: Vec::new(),
        rows: Vec::new(),
        soc_rows: Vec::new(),
        objective: Objective::default(),
        lazy: Vec::new(),
        evaluators: Vec::new(),
        layout,
    }
}

/// Attaches the hypograph cone row of every lazy revenue context, turning a
/// cut-based system into an explicit conic one. The lazy definitions stay
/// in place so cut separation remains possible; a conic solver should use
/// the rows and ignore the lazy list.
pub fn add_soc_rows<S: Scalar>(system: &mut ConstraintSystem<S>) {
    let four: S = real(4.0);
    let mut rows = Vec::with_capacity(system.lazy.len());
    for hook in &system.lazy {
        let ev = &hook.eval;
        let d_max = ev.d_max();
        let w0 = ev.w_home();
        let mut vector = Vec::with_capacity(ev.len() + 2);
        vector.push(AffExpr::constant((four * d_max * w0).sqrt()));
        for (idx, (wh, dh)) in ev.weights().iter().zip(ev.revenues()).enumerate() {
            let coef2 = four * (d_max - *dh) * *wh;
            debug_assert!(coef2 >= -S::epsilon(), "dmax must dominate every revenue");
            vector.push(AffExpr {
                terms: vec![(hook.x[idx], coef2.max(S::zero()).sqrt())],
                constant: S::zero(),
            });
        }
        let mut tail_terms: Vec<(VarId, S)> = hook
            .x
            .iter()
            .zip(ev.weights())
            .map(|(v, w)| (*v, *w))
            .collect();
        tail_terms.push((hook.q, S::one()));
        vector.push(AffExpr { terms: tail_terms, constant: w0 - d_max });

        let mut rhs_terms: Vec<(VarId, S)> = hook
            .x
            .iter()
            .zip(ev.weights())
            .map(|(v, w)| (*v, *w))
            .collect();
        rhs_terms.push((hook.q, -S::one()));
        rows.push(SocRow {
            vector,
            rhs: AffExpr { terms: rhs_terms, constant: w0 + d_max },
        });
    }
    system.soc_rows = rows;
}
