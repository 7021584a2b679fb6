//! Dense bounded-variable primal simplex.
//!
//! A deliberately simple, self-contained LP solver: full dense tableau,
//! two phases (artificial variables drive out infeasibility, then the real
//! objective runs), variables live between explicit bounds and nonbasic
//! variables sit at either bound. Entering variables are picked by largest
//! reduced-cost violation with index tie-breaks, switching to Bland's rule
//! after a run of degenerate pivots so cycling cannot persist. The reduced
//! cost row is refreshed from scratch periodically to cap drift, and every
//! reported solution is verified against rows and bounds before it leaves
//! the solver.
//!
//! Geared to the model sizes this crate solves (hundreds to a few thousand
//! rows and columns); tolerances are calibrated for `f64`.

use crate::error::{Error, Result};
use crate::formulation::system::{LinRow, Objective, Sense, VarDef, VarId};
use crate::scalar::{real, Scalar};

use super::backend::{LpBackend, LpSolution, LpStatus};

/// Columns below this magnitude never pivot.
const PIVOT_TOL: f64 = 1e-9;
/// Reduced-cost threshold for entering candidates.
const PRICE_TOL: f64 = 1e-9;
/// Allowed residual infeasibility in phase 1 and in the final check.
const FEAS_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGEN_SWITCH: usize = 60;
/// Pivots between reduced-cost refreshes.
const REFRESH_EVERY: usize = 128;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum ColState {
    Basic(usize),
    AtLower,
    AtUpper,
}

/// Dense two-phase bounded-variable simplex implementing [`LpBackend`].
#[derive(Clone, Debug, Default)]
pub struct DenseSimplex<S> {
    obj: Vec<S>,
    lb: Vec<S>,
    ub: Vec<S>,
    rows: Vec<LinRow<S>>,
    max_pivots: usize,
}

impl<S: Scalar> DenseSimplex<S> {
    /// Empty solver; load a model before solving.
    pub fn new() -> Self {
        DenseSimplex {
            obj: Vec::new(),
            lb: Vec::new(),
            ub: Vec::new(),
            rows: Vec::new(),
            max_pivots: 0,
        }
    }
}

impl<S: Scalar> LpBackend<S> for DenseSimplex<S> {
    fn load(&mut self, vars: &[VarDef<S>], rows: &[LinRow<S>], objective: &Objective<S>) {
        self.lb = vars.iter().map(|v| v.lb).collect();
        self.ub = vars.iter().map(|v| v.ub).collect();
        self.obj = vec![S::zero(); vars.len()];
        for (v, c) in &objective.terms {
            self.obj[v.0] += *c;
        }
        self.rows = rows.to_vec();
        self.max_pivots = 0;
    }

    fn add_row(&mut self, row: LinRow<S>) {
        self.rows.push(row);
    }

    fn set_bounds(&mut self, var: VarId, lb: S, ub: S) {
        self.lb[var.0] = lb;
        self.ub[var.0] = ub;
    }

    fn bounds(&self, var: VarId) -> (S, S) {
        (self.lb[var.0], self.ub[var.0])
    }

    fn solve(&mut self) -> Result<LpSolution<S>> {
        Tableau::build(self)?.solve(self)
    }
}

/// Working state of one solve.
struct Tableau<S> {
    m: usize,
    /// Structural columns (the user's variables).
    n: usize,
    /// Structural + slack columns; artificials sit beyond this.
    n_real: usize,
    cols: usize,
    /// Dense rows of `B^-1 A`.
    t: Vec<Vec<S>>,
    /// Current value of every column.
    xval: Vec<S>,
    lb: Vec<S>,
    ub: Vec<S>,
    state: Vec<ColState>,
    basis: Vec<usize>,
    /// Reduced costs of the active phase (minimization).
    z: Vec<S>,
    /// Active-phase costs.
    cost: Vec<S>,
}

impl<S: Scalar> Tableau<S> {
    fn build(p: &DenseSimplex<S>) -> Result<Self> {
        let n = p.lb.len();
        let m = p.rows.len();
        let n_slack = p
            .rows
            .iter()
            .filter(|r| r.sense != Sense::Eq)
            .count();
        let n_real = n + n_slack;
        let cols = n_real + m;

        let mut lb = Vec::with_capacity(cols);
        let mut ub = Vec::with_capacity(cols);
        lb.extend_from_slice(&p.lb);
        ub.extend_from_slice(&p.ub);
        for (l, u) in lb.iter().zip(ub.iter()) {
            if !(*l <= *u) {
                // Crossed bounds: the relaxation is trivially empty. The
                // branch-and-cut loop never produces these, but a caller
                // could.
                return Err(Error::Backend(format!(
                    "crossed variable bounds [{}, {}]",
                    l, u
                )));
            }
            if !l.is_finite() {
                return Err(Error::Backend(
                    "variables need a finite lower bound".into(),
                ));
            }
        }
        lb.resize(cols, S::zero());
        ub.resize(cols, S::infinity());

        // Equality-form rows: structural coefficients, then one slack for
        // each inequality, then one artificial per row.
        let mut t = vec![vec![S::zero(); cols]; m];
        let mut rhs = vec![S::zero(); m];
        let mut slack_at = n;
        for (r, row) in p.rows.iter().enumerate() {
            for (v, c) in &row.terms {
                t[r][v.0] += *c;
            }
            match row.sense {
                Sense::Le => {
                    t[r][slack_at] = S::one();
                    slack_at += 1;
                }
                Sense::Ge => {
                    t[r][slack_at] = -S::one();
                    slack_at += 1;
                }
                Sense::Eq => {}
            }
            rhs[r] = row.rhs;
        }

        // Nonbasic columns start at their lower bound.
        let mut xval = lb.clone();
        let mut state = vec![ColState::AtLower; cols];

        // Artificial columns make the start basis: flip rows so residuals
        // are nonnegative, then seed one artificial per row.
        let mut basis = Vec::with_capacity(m);
        for r in 0..m {
            let mut residual = rhs[r];
            for j in 0..n_real {
                residual -= t[r][j] * xval[j];
            }
            if residual < S::zero() {
                for j in 0..n_real {
                    t[r][j] = -t[r][j];
                }
                residual = -residual;
            }
            let art = n_real + r;
            t[r][art] = S::one();
            xval[art] = residual;
            state[art] = ColState::Basic(r);
            basis.push(art);
        }

        Ok(Tableau {
            m,
            n,
            n_real,
            cols,
            t,
            xval,
            lb,
            ub,
            state,
            basis,
            z: vec![S::zero(); cols],
            cost: vec![S::zero(); cols],
        })
    }

    /// Recomputes reduced costs `z = c - c_B^T B^-1 A` for the active phase.
    fn refresh_reduced_costs(&mut self) {
        self.z.copy_from_slice(&self.cost);
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb != S::zero() {
                let row = &self.t[r];
                for j in 0..self.cols {
                    self.z[j] -= cb * row[j];
                }
            }
        }
    }

    fn solve(mut self, p: &DenseSimplex<S>) -> Result<LpSolution<S>> {
        let max_pivots = if p.max_pivots > 0 {
            p.max_pivots
        } else {
            2000 + 40 * (self.m + self.cols)
        };

        // Phase 1: minimize the artificial total.
        for j in self.n_real..self.cols {
            self.cost[j] = S::one();
        }
        self.refresh_reduced_costs();
        self.run(max_pivots)?;

        let infeas: S = (self.n_real..self.cols).map(|j| self.xval[j]).sum();
        let scale = S::one() + self.rhs_scale(p);
        if infeas > real::<S>(FEAS_TOL) * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                values: Vec::new(),
                objective: S::zero(),
            });
        }

        // Freeze artificials at zero and kick basic ones out where a real
        // column can replace them; unremovable ones mark redundant rows and
        // stay pinned by their [0, 0] bounds.
        for j in self.n_real..self.cols {
            self.lb[j] = S::zero();
            self.ub[j] = S::zero();
            if self.state[j] == ColState::AtUpper {
                self.state[j] = ColState::AtLower;
            }
            self.xval[j] = self.xval[j].max(S::zero());
        }
        for r in 0..self.m {
            if self.basis[r] >= self.n_real {
                if let Some(j) = (0..self.n_real).find(|&j| {
                    !matches!(self.state[j], ColState::Basic(_))
                        && self.t[r][j].abs() > real::<S>(PIVOT_TOL)
                }) {
                    let art = self.basis[r];
                    self.xval[art] = S::zero();
                    self.state[art] = ColState::AtLower;
                    self.pivot(r, j, self.xval[j]);
                }
            }
        }

        // Phase 2: minimize the negated objective.
        self.cost = vec![S::zero(); self.cols];
        for j in 0..self.n {
            self.cost[j] = -p.obj[j];
        }
        self.refresh_reduced_costs();
        self.run(max_pivots)?;

        // Read out, clamp drift, and verify.
        let mut values = Vec::with_capacity(self.n);
        for j in 0..self.n {
            let v = self.xval[j].max(self.lb[j]).min(self.ub[j]);
            values.push(v);
        }
        let mut worst = S::zero();
        for row in &p.rows {
            worst = worst.max(row.violation(&values));
        }
        if worst > real::<S>(FEAS_TOL) * scale {
            return Err(Error::Backend(format!(
                "solution fails verification with residual {}",
                worst
            )));
        }
        let objective = (0..self.n).map(|j| p.obj[j] * values[j]).sum();
        Ok(LpSolution { status: LpStatus::Optimal, values, objective })
    }

    fn rhs_scale(&self, p: &DenseSimplex<S>) -> S {
        p.rows
            .iter()
            .map(|r| r.rhs.abs())
            .fold(S::zero(), S::max)
    }

    /// Minimizes the active cost until optimal; artificial columns never
    /// re-enter the basis because their bounds pin them once frozen.
    fn run(&mut self, max_pivots: usize) -> Result<()> {
        let price_tol = real::<S>(PRICE_TOL);
        let pivot_tol = real::<S>(PIVOT_TOL);
        let mut degenerate_run = 0usize;
        let mut bland = false;

        for pivot_count in 0..max_pivots {
            if pivot_count > 0 && pivot_count % REFRESH_EVERY == 0 {
                self.refresh_reduced_costs();
            }

            // Entering column: best reduced-cost violation (or first, under
            // Bland's rule).
            let mut entering: Option<(usize, S)> = None;
            for j in 0..self.n_real {
                if matches!(self.state[j], ColState::Basic(_)) || self.lb[j] == self.ub[j] {
                    continue;
                }
                let d = self.z[j];
                let score = match self.state[j] {
                    ColState::AtLower => -d,
                    ColState::AtUpper => d,
                    ColState::Basic(_) => unreachable!(),
                };
                if score > price_tol {
                    if bland {
                        entering = Some((j, score));
                        break;
                    }
                    match entering {
                        Some((_, best)) if best >= score => {}
                        _ => entering = Some((j, score)),
                    }
                }
            }
            let Some((enter, _)) = entering else {
                return Ok(());
            };

            // Direction: up from the lower bound, down from the upper.
            let up = self.state[enter] == ColState::AtLower;
            let range = self.ub[enter] - self.lb[enter];

            // Ratio test: the entering step is capped by its own range and
            // by every basic variable hitting one of its bounds.
            let mut step = range; // may be infinite
            let mut blocking: Option<(usize, bool)> = None; // (row, leaves at lower)
            for r in 0..self.m {
                let tc = self.t[r][enter];
                if tc.abs() <= pivot_tol {
                    continue;
                }
                // Basic value moves by -dir * t * step.
                let moves_down = (tc > S::zero()) == up;
                let b = self.basis[r];
                let limit = if moves_down {
                    (self.xval[b] - self.lb[b]) / tc.abs()
                } else {
                    if self.ub[b].is_infinite() {
                        continue;
                    }
                    (self.ub[b] - self.xval[b]) / tc.abs()
                };
                let limit = limit.max(S::zero());
                let improves = match blocking {
                    None => limit < step,
                    Some((br, _)) => {
                        limit < step
                            && (step - limit > real::<S>(1e-12)
                                || tc.abs() > self.t[br][enter].abs())
                    }
                };
                if improves || (limit <= step && blocking.is_none()) {
                    step = limit;
                    blocking = Some((r, moves_down));
                }
            }

            if step.is_infinite() {
                return Err(Error::Backend("objective unbounded below".into()));
            }

            if step <= real::<S>(1e-12) {
                degenerate_run += 1;
                if degenerate_run > DEGEN_SWITCH {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            match blocking {
                None => {
                    // Bound flip: the entering variable crosses its range.
                    let dir = if up { S::one() } else { -S::one() };
                    for r in 0..self.m {
                        let tc = self.t[r][enter];
                        if tc != S::zero() {
                            let b = self.basis[r];
                            self.xval[b] -= dir * tc * step;
                        }
                    }
                    if up {
                        self.xval[enter] = self.ub[enter];
                        self.state[enter] = ColState::AtUpper;
                    } else {
                        self.xval[enter] = self.lb[enter];
                        self.state[enter] = ColState::AtLower;
                    }
                }
                Some((row, leaves_low)) => {
                    let dir = if up { S::one() } else { -S::one() };
                    for r in 0..self.m {
                        if r != row {
                            let tc = self.t[r][enter];
                            if tc != S::zero() {
                                let b = self.basis[r];
                                self.xval[b] -= dir * tc * step;
                            }
                        }
                    }
                    let entering_value = self.xval[enter] + dir * step;
                    let leaving = self.basis[row];
                    self.xval[leaving] = if leaves_low { self.lb[leaving] } else { self.ub[leaving] };
                    self.state[leaving] = if leaves_low { ColState::AtLower } else { ColState::AtUpper };
                    self.pivot(row, enter, entering_value);
                }
            }

        }
        Err(Error::Backend(format!(
            "simplex hit the pivot limit of {}",
            max_pivots
        )))
    }

    /// Row operations bringing `enter` into the basis on `row`.
    fn pivot(&mut self, row: usize, enter: usize, entering_value: S) {
        let piv = self.t[row][enter];
        debug_assert!(piv.abs() > S::zero(), "pivot on a zero coefficient");
        let inv = S::one() / piv;
        for j in 0..self.cols {
            self.t[row][j] *= inv;
        }
        self.t[row][enter] = S::one();
        for r in 0..self.m {
            if r != row {
                let f = self.t[r][enter];
                if f != S::zero() {
                    // Manual split borrow: copy the pivot row out is too
                    // costly; index juggling keeps it allocation-free.
                    let (pr, tr) = if r < row {
                        let (a, b) = self.t.split_at_mut(row);
                        (&b[0], &mut a[r])
                    } else {
                        let (a, b) = self.t.split_at_mut(r);
                        (&a[row], &mut b[0])
                    };
                    for j in 0..self.cols {
                        tr[j] -= f * pr[j];
                    }
                    tr[enter] = S::zero();
                }
            }
        }
        let f = self.z[enter];
        if f != S::zero() {
            let pr = &self.t[row];
            for j in 0..self.cols {
                self.z[j] -= f * pr[j];
            }
            self.z[enter] = S::zero();
        }
        self.basis[row] = enter;
        self.state[enter] = ColState::Basic(row);
        self.xval[enter] = entering_value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::system::{VarKind, VarTag};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn var(lb: f64, ub: f64) -> VarDef<f64> {
        VarDef { kind: VarKind::Continuous, lb, ub, tag: VarTag::Revenue { rev: 0 } }
    }

    fn solve(
        vars: &[VarDef<f64>],
        rows: &[LinRow<f64>],
        obj: &[(usize, f64)],
    ) -> Result<LpSolution<f64>> {
        let mut lp = DenseSimplex::new();
        let objective = Objective {
            terms: obj.iter().map(|(j, c)| (VarId(*j), *c)).collect(),
        };
        lp.load(vars, rows, &objective);
        lp.solve()
    }

    fn row(terms: &[(usize, f64)], sense: Sense, rhs: f64) -> LinRow<f64> {
        LinRow {
            terms: terms.iter().map(|(j, c)| (VarId(*j), *c)).collect(),
            sense,
            rhs,
        }
    }

    #[test]
    fn box_maximum_sits_at_the_corner() {
        let vars = vec![var(0.0, 5.0), var(-2.0, 3.0)];
        let sol = solve(&vars, &[], &[(0, 1.0), (1, -2.0)]).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.values, vec![5.0, -2.0]);
        assert_eq!(sol.objective, 9.0);
    }

    #[test]
    fn knapsack_relaxation() {
        // max x + 2y st x + y <= 1.5, x, y in [0, 1]: y = 1, x = 0.5.
        let vars = vec![var(0.0, 1.0), var(0.0, 1.0)];
        let rows = vec![row(&[(0, 1.0), (1, 1.0)], Sense::Le, 1.5)];
        let sol = solve(&vars, &rows, &[(0, 1.0), (1, 2.0)]).unwrap();
        assert!((sol.objective - 2.5).abs() < 1e-9);
        assert!((sol.values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x + y st x + y = 2, x - y >= 1, x, y in [0, 3]:
        // objective fixed at 2 by the equality.
        let vars = vec![var(0.0, 3.0), var(0.0, 3.0)];
        let rows = vec![
            row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 2.0),
            row(&[(0, 1.0), (1, -1.0)], Sense::Ge, 1.0),
        ];
        let sol = solve(&vars, &rows, &[(0, 1.0), (1, 1.0)]).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-9);
        assert!(sol.values[0] - sol.values[1] >= 1.0 - 1e-9);
    }

    #[test]
    fn infeasibility_is_detected() {
        let vars = vec![var(0.0, 1.0)];
        let rows = vec![
            row(&[(0, 1.0)], Sense::Ge, 2.0), // x >= 2 but x <= 1
        ];
        let sol = solve(&vars, &rows, &[(0, 1.0)]).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn negative_lower_bounds_and_ge_rows() {
        // min-like: max -x st x >= -3 (bound), x + y <= 0, y in [-1, 4].
        let vars = vec![var(-3.0, 10.0), var(-1.0, 4.0)];
        let rows = vec![row(&[(0, 1.0), (1, 1.0)], Sense::Le, 0.0)];
        let sol = solve(&vars, &rows, &[(0, -1.0), (1, 1.0)]).unwrap();
        // x = -3; y capped by x + y <= 0 -> y = 3.
        assert!((sol.objective - 6.0).abs() < 1e-9);
    }

    #[test]
    fn cuts_can_be_appended_between_solves() {
        let vars = vec![var(0.0, 1.0), var(0.0, 1.0)];
        let mut lp = DenseSimplex::new();
        let objective = Objective { terms: vec![(VarId(0), 1.0), (VarId(1), 1.0)] };
        lp.load(&vars, &[], &objective);
        assert!((lp.solve().unwrap().objective - 2.0).abs() < 1e-9);
        lp.add_row(row(&[(0, 1.0), (1, 1.0)], Sense::Le, 1.0));
        assert!((lp.solve().unwrap().objective - 1.0).abs() < 1e-9);
        lp.set_bounds(VarId(0), 1.0, 1.0);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.values[0] - 1.0).abs() < 1e-9);
        assert!(sol.values[1].abs() < 1e-9);
    }

    #[test]
    fn degenerate_rows_do_not_cycle() {
        // Many redundant rows through the origin.
        let vars = vec![var(0.0, 1.0), var(0.0, 1.0), var(0.0, 1.0)];
        let mut rows = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    rows.push(row(&[(a, 1.0), (b, -1.0)], Sense::Le, 0.0));
                }
            }
        }
        let sol = solve(&vars, &rows, &[(0, 1.0), (1, 1.0), (2, 1.0)]).unwrap();
        // All equal by the rows; maximum at all-ones.
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn matches_reference_solver_on_random_lps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut optimal = 0usize;
        let mut infeasible = 0usize;
        for _case in 0..600 {
            let n = rng.random_range(1..7);
            let m = rng.random_range(0..9);
            let vars: Vec<VarDef<f64>> = (0..n)
                .map(|_| {
                    let lo: f64 = rng.random_range(-5.0..1.0);
                    let hi = lo + rng.random_range(0.0..8.0);
                    var(lo, hi)
                })
                .collect();
            let obj: Vec<(usize, f64)> =
                (0..n).map(|j| (j, rng.random_range(-5.0..5.0))).collect();
            let rows: Vec<LinRow<f64>> = (0..m)
                .map(|_| {
                    let mut terms: Vec<(usize, f64)> = Vec::new();
                    for j in 0..n {
                        if rng.random_range(0..3) > 0 {
                            terms.push((j, rng.random_range(-3.0..3.0)));
                        }
                    }
                    let sense = match rng.random_range(0..3) {
                        0 => Sense::Le,
                        1 => Sense::Ge,
                        _ => Sense::Eq,
                    };
                    row(&terms, sense, rng.random_range(-6.0..6.0))
                })
                .collect();

            let mine = solve(&vars, &rows, &obj).unwrap();

            let mut reference = minilp::Problem::new(minilp::OptimizationDirection::Maximize);
            let ids: Vec<minilp::Variable> = vars
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let c = obj.iter().find(|(k, _)| *k == j).map(|(_, c)| *c).unwrap_or(0.0);
                    reference.add_var(c, (v.lb, v.ub))
                })
                .collect();
            for r in &rows {
                let expr: Vec<(minilp::Variable, f64)> =
                    r.terms.iter().map(|(v, c)| (ids[v.0], *c)).collect();
                let op = match r.sense {
                    Sense::Le => minilp::ComparisonOp::Le,
                    Sense::Ge => minilp::ComparisonOp::Ge,
                    Sense::Eq => minilp::ComparisonOp::Eq,
                };
                reference.add_constraint(&expr, op, r.rhs);
            }
            match reference.solve() {
                Ok(ref_sol) => {
                    optimal += 1;
                    assert_eq!(
                        mine.status,
                        LpStatus::Optimal,
                        "reference found an optimum, we reported infeasible"
                    );
                    let gap = (mine.objective - ref_sol.objective()).abs();
                    assert!(
                        gap < 1e-6 * (1.0 + ref_sol.objective().abs()),
                        "objective {} vs reference {}",
                        mine.objective,
                        ref_sol.objective()
                    );
                }
                Err(minilp::Error::Infeasible) => {
                    infeasible += 1;
                    assert_eq!(
                        mine.status,
                        LpStatus::Infeasible,
                        "reference reported infeasible, we found an optimum"
                    );
                }
                Err(other) => panic!("reference solver failed: {:?}", other),
            }
        }
        // The generator must exercise both outcomes.
        assert!(optimal > 100, "too few optimal cases: {}", optimal);
        assert!(infeasible > 50, "too few infeasible cases: {}", infeasible);
    }

    #[test]
    fn redundant_equalities_keep_artificials_pinned() {
        // Two copies of the same equality: one artificial cannot leave the
        // basis, but its frozen bounds keep the solution exact.
        let vars = vec![var(0.0, 4.0), var(0.0, 4.0)];
        let rows = vec![
            row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 3.0),
            row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 3.0),
        ];
        let sol = solve(&vars, &rows, &[(0, 2.0), (1, 1.0)]).unwrap();
        assert!((sol.objective - 6.0).abs() < 1e-9); // x = 3, y = 0
    }
}
