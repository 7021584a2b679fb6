//! Explicit linearizations of the fractional revenue terms.
//!
//! Both encodings restate, per revenue context, the defining identity of
//! the captured revenue `q = sum_h d_h w_h x_h / (w0 + sum_h w_h x_h)`
//! with mixed-integer-linear rows, so a plain LP-based branch-and-bound can
//! solve the model without cut separation.
//!
//! **Lifted reciprocal** ([`attach_r1`]): introduce the denominator
//! reciprocal `y = 1 / (w0 + sum_h w_h x_h)` and products `g_h = x_h y`.
//! The identity becomes the linear row `w0 y + sum_h w_h g_h = 1`, the
//! objective reads revenue off `sum_h d_h w_h g_h`, and each product is
//! pinned by four McCormick rows, exact because `x` is binary. Adds
//! `|H| + 1` continuous variables and `4 |H| + 1` rows per context.
//!
//! **Bit expansion** ([`attach_r4`]): scale weights to integers
//! `W = max(1, round(scale * w))`, write the station part of the
//! denominator as a bit string `sum_h W_h x_h = sum_b 2^b u_b`, and
//! linearize `z * u_b` products so that `z (W0 + sum 2^b u_b) = sum d_h W_h
//! x_h` pins the revenue variable `z`. Exact up to the weight rounding set
//! by `scale`. Adds `1 + bits` continuous variables, `bits` binaries and
//! `3 bits + 2` rows per context.

use crate::error::{Error, Result};
use crate::instance::{Instance, WeightTable};
use crate::scalar::{count, real, Scalar};

use super::system::{ConstraintSystem, LinRow, Sense, VarId, VarTag};

/// Largest integer weight allowed; beyond this exact integer arithmetic in
/// the scalar type is no longer guaranteed.
const MAX_SCALED_WEIGHT: f64 = 9.0e15; // < 2^53

/// Attaches the lifted reciprocal encoding to every revenue context.
pub fn attach_r1<S: Scalar>(
    sys: &mut ConstraintSystem<S>,
    inst: &Instance<S>,
    weights: &WeightTable<S>,
) {
    let unit_revenues = inst.option_revenues();
    let h_count = inst.num_options();
    for rev in 0..sys.layout.revenues.len() {
        let (node, decision, demand, weight) = {
            let r = &sys.layout.revenues[rev];
            (r.node, r.decision, r.demand, r.weight)
        };
        let w0 = weights.w_home[node];
        let w = weights.w[node].clone();
        let w_sum: S = w.iter().copied().sum();
        let y_lo = S::one() / (w0 + w_sum);
        let y_hi = S::one() / w0;
        let x = sys.layout.x[decision].clone();

        let y = sys.add_continuous(y_lo, y_hi, VarTag::Reciprocal { rev });
        let g: Vec<VarId> = (0..h_count)
            .map(|h| sys.add_continuous(S::zero(), y_hi, VarTag::Product { rev, option: h }))
            .collect();

        // Defining identity: w0 y + sum_h w_h g_h = 1.
        let mut terms = vec![(y, w0)];
        for h in 0..h_count {
            terms.push((g[h], w[h]));
        }
        sys.rows.push(LinRow { terms, sense: Sense::Eq, rhs: S::one() });

        // McCormick envelope of g_h = x_h y, exact for binary x_h.
        for h in 0..h_count {
            sys.rows.push(LinRow {
                terms: vec![(g[h], S::one()), (x[h], -y_lo)],
                sense: Sense::Ge,
                rhs: S::zero(),
            });
            sys.rows.push(LinRow {
                terms: vec![(g[h], S::one()), (y, -S::one()), (x[h], -y_hi)],
                sense: Sense::Ge,
                rhs: -y_hi,
            });
            sys.rows.push(LinRow {
                terms: vec![(g[h], S::one()), (x[h], -y_hi)],
                sense: Sense::Le,
                rhs: S::zero(),
            });
            sys.rows.push(LinRow {
                terms: vec![(g[h], S::one()), (y, -S::one()), (x[h], -y_lo)],
                sense: Sense::Le,
                rhs: -y_lo,
            });
        }

        // Revenue read directly off the products: q = sum_h d_h w_h g_h.
        for h in 0..h_count {
            let coef = weight * demand * unit_revenues[h] * w[h];
            if coef != S::zero() {
                sys.objective.terms.push((g[h], coef));
            }
        }
    }
}

/// Integer-scaled station weights and the bit width of their sum, per
/// demand node: `W[i][h] = max(1, round(scale * w[i][h]))`, and
/// `bits[i]` such that `sum_h W[i][h] < 2^bits[i]`.
pub fn scaled_weights<S: Scalar>(
    weights: &WeightTable<S>,
    scale: f64,
) -> Result<(Vec<Vec<u64>>, Vec<usize>)> {
    if !(scale.is_finite() && scale >= 1.0) {
        return Err(Error::Invalid(format!(
            "weight scale must be finite and at least 1, got {}",
            scale
        )));
    }
    let mut scaled = Vec::with_capacity(weights.w.len());
    let mut bits = Vec::with_capacity(weights.w.len());
    for row in &weights.w {
        let mut srow = Vec::with_capacity(row.len());
        let mut total: u64 = 0;
        for w in row {
            let v = (w.to_f64().expect("weight converts to f64") * scale).round();
            if !(v.is_finite() && v <= MAX_SCALED_WEIGHT) {
                return Err(Error::Invalid(format!(
                    "scaled weight {} overflows exact integer range; lower the scale",
                    v
                )));
            }
            let w_int = (v as u64).max(1);
            total = total
                .checked_add(w_int)
                .ok_or_else(|| Error::Invalid("scaled weight sum overflows".into()))?;
            srow.push(w_int);
        }
        scaled.push(srow);
        bits.push((64 - total.leading_zeros()) as usize);
    }
    Ok((scaled, bits))
}

/// Attaches the bit-expansion encoding to every revenue context and records
/// the per-year total bit count in the layout dimensions.
pub fn attach_r4<S: Scalar>(
    sys: &mut ConstraintSystem<S>,
    inst: &Instance<S>,
    weights: &WeightTable<S>,
    scale: f64,
) -> Result<()> {
    let (scaled, bits_per_node) = scaled_weights(weights, scale)?;
    let unit_revenues = inst.option_revenues();
    let h_count = inst.num_options();

    for rev in 0..sys.layout.revenues.len() {
        let (node, decision, demand, weight) = {
            let r = &sys.layout.revenues[rev];
            (r.node, r.decision, r.demand, r.weight)
        };
        let w0_int = (weights.w_home[node].to_f64().expect("weight converts to f64") * scale)
            .round()
            .max(1.0);
        if w0_int > MAX_SCALED_WEIGHT {
            return Err(Error::Invalid(
                "scaled home weight overflows exact integer range; lower the scale".into(),
            ));
        }
        let w_int = &scaled[node];
        let bits = bits_per_node[node];
        let d: Vec<S> = unit_revenues.iter().map(|r| *r * demand).collect();
        let d_max = d.iter().copied().fold(S::zero(), S::max);
        let x = sys.layout.x[decision].clone();

        let z = sys.add_continuous(S::zero(), d_max, VarTag::Ratio { rev });
        sys.objective.terms.push((z, weight));
        let u: Vec<VarId> = (0..bits).map(|b| sys.add_binary(VarTag::Bit { rev, bit: b })).collect();
        let v: Vec<VarId> = (0..bits)
            .map(|b| sys.add_continuous(S::zero(), d_max, VarTag::BitProduct { rev, bit: b }))
            .collect();

        // Station denominator equals its bit expansion:
        // sum_h W_h x_h - sum_b 2^b u_b = 0.
        let mut terms: Vec<(VarId, S)> = (0..h_count)
            .map(|h| (x[h], count::<S>(w_int[h] as usize)))
            .collect();
        for (b, ub) in u.iter().enumerate() {
            terms.push((*ub, -real::<S>((1u64 << b) as f64)));
        }
        sys.rows.push(LinRow { terms, sense: Sense::Eq, rhs: S::zero() });

        // Revenue identity z * (W0 + sum_b 2^b u_b) = sum_h d_h W_h x_h,
        // with v_b standing in for z u_b:
        // W0 z + sum_b 2^b v_b - sum_h d_h W_h x_h = 0.
        let mut terms: Vec<(VarId, S)> = vec![(z, real::<S>(w0_int))];
        for (b, vb) in v.iter().enumerate() {
            terms.push((*vb, real::<S>((1u64 << b) as f64)));
        }
        for h in 0..h_count {
            let coef = d[h] * count::<S>(w_int[h] as usize);
            if coef != S::zero() {
                terms.push((x[h], -coef));
            }
        }
        sys.rows.push(LinRow { terms, sense: Sense::Eq, rhs: S::zero() });

        // McCormick envelope of v_b = z u_b over z in [0, d_max].
        for b in 0..bits {
            sys.rows.push(LinRow {
                terms: vec![(v[b], S::one()), (u[b], -d_max)],
                sense: Sense::Le,
                rhs: S::zero(),
            });
            sys.rows.push(LinRow {
                terms: vec![(v[b], S::one()), (z, -S::one())],
                sense: Sense::Le,
                rhs: S::zero(),
            });
            sys.rows.push(LinRow {
                terms: vec![(v[b], S::one()), (z, -S::one()), (u[b], -d_max)],
                sense: Sense::Ge,
                rhs: -d_max,
            });
        }
    }

    // Per-year bit total: every (node, year, scenario) context re-uses the
    // node's bit width.
    sys.layout.dims.r4_bits = Some(bits_per_node.iter().sum());
    Ok(())
}
