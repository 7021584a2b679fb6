//! Exact evaluation of the per-node logit revenue function.
//!
//! For one demand node in one year, let `w0` be the home weight, `w[h]` the
//! station weights and `d[h] = demand * unit_revenue[h]` the revenue option
//! `h` would earn if it captured the whole node. With open vector
//! `x in [0, 1]^H` the captured revenue is
//!
//! ```text
//! Q(x) = sum_h w[h] * d[h] * x[h] / (w0 + sum_h w[h] * x[h])
//! ```
//!
//! at binary points. The continuous extension used everywhere in this crate
//! replaces `d[h] * x[h]` by `dmax * x[h] - (dmax - d[h]) * x[h]^2` in the
//! numerator, where `dmax = max_h d[h]`. The two agree on binaries (there
//! `x^2 = x`), and the extension is *concave* on the whole box, which is
//! what makes outer approximation by tangent planes exact:
//!
//! ```text
//! Q(x) <= Q(y) + grad Q(y) . (x - y)    for all x, y in [0, 1]^H.
//! ```
//!
//! The same algebra gives a second-order-cone description of the hypograph
//! `q <= Q(x)` on the box, used by the conic feasibility checks:
//!
//! ```text
//! || [ 2 sqrt(dmax w0),
//!      { 2 sqrt((dmax - d[h]) w[h]) x[h] }_h,
//!      D - dmax + q ] ||_2  <=  D + dmax - q,      D = w0 + sum w[h] x[h].
//! ```

use crate::scalar::{real, Scalar};

/// Evaluator for one node-year revenue term.
#[derive(Clone, Debug, PartialEq)]
pub struct QEvaluator<S> {
    w_home: S,
    w: Vec<S>,
    d: Vec<S>,
    d_max: S,
}

impl<S: Scalar> QEvaluator<S> {
    /// Builds an evaluator from the home weight, one logit weight per
    /// option, and the revenue `d[h]` each option would earn if it captured
    /// the node alone.
    ///
    /// Panics on empty options, nonpositive weights or negative revenues —
    /// weights come from exponentials and revenues from demands, so either
    /// would be an internal error.
    pub fn new(w_home: S, w: Vec<S>, d: Vec<S>) -> Self {
        assert!(!w.is_empty(), "evaluator needs at least one option");
        assert_eq!(w.len(), d.len(), "one revenue entry per option");
        assert!(w_home > S::zero() && w_home.is_finite(), "home weight must be positive");
        for wh in &w {
            assert!(*wh > S::zero() && wh.is_finite(), "station weights must be positive");
        }
        for dh in &d {
            assert!(*dh >= S::zero() && dh.is_finite(), "option revenues must be nonnegative");
        }
        let d_max = d.iter().copied().fold(S::zero(), S::max);
        QEvaluator { w_home, w, d, d_max }
    }

    /// Number of options.
    pub fn len(&self) -> usize {
        self.w.len()
    }

    /// True if the evaluator has no options (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Home weight `w0`.
    pub fn w_home(&self) -> S {
        self.w_home
    }

    /// Station weights.
    pub fn weights(&self) -> &[S] {
        &self.w
    }

    /// Full-capture revenues per option.
    pub fn revenues(&self) -> &[S] {
        &self.d
    }

    /// Largest full-capture revenue, the `dmax` of the concave extension.
    pub fn d_max(&self) -> S {
        self.d_max
    }

    /// Concave extension value at a fractional point.
    pub fn value(&self, x: &[S]) -> S {
        debug_assert_eq!(x.len(), self.w.len());
        let mut num = S::zero();
        let mut den = self.w_home;
        for ((wh, dh), xh) in self.w.iter().zip(&self.d).zip(x) {
            num += *wh * (self.d_max * *xh - (self.d_max - *dh) * *xh * *xh);
            den += *wh * *xh;
        }
        num / den
    }

    /// Exact revenue of a binary open set.
    pub fn value_open(&self, open: &[bool]) -> S {
        debug_assert_eq!(open.len(), self.w.len());
        let mut num = S::zero();
        let mut den = self.w_home;
        for ((wh, dh), o) in self.w.iter().zip(&self.d).zip(open) {
            if *o {
                num += *wh * *dh;
                den += *wh;
            }
        }
        num / den
    }

    /// Gradient of the concave extension at a fractional point.
    pub fn gradient(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.w.len());
        let mut num = S::zero();
        let mut den = self.w_home;
        for ((wh, dh), xh) in self.w.iter().zip(&self.d).zip(x) {
            num += *wh * (self.d_max * *xh - (self.d_max - *dh) * *xh * *xh);
            den += *wh * *xh;
        }
        let den2 = den * den;
        self.w
            .iter()
            .zip(&self.d)
            .zip(x)
            .map(|((wh, dh), xh)| {
                let slope = self.d_max - (self.d_max - *dh) * (*xh + *xh);
                *wh * (slope * den - num) / den2
            })
            .collect()
    }

    /// Tangent plane at `x`: returns `(g, c)` with `Q(y) <= c + g . y` for
    /// every `y` in the box, with equality at `y = x`.
    pub fn tangent(&self, x: &[S]) -> (Vec<S>, S) {
        let g = self.gradient(x);
        let mut c = self.value(x);
        for (gh, xh) in g.iter().zip(x) {
            c -= *gh * *xh;
        }
        (g, c)
    }

    /// Left- and right-hand side of the hypograph cone membership test at
    /// `(x, q)`: the pair `(||v||, rhs)`; the point satisfies the conic
    /// revenue description exactly when `||v|| <= rhs`.
    pub fn soc_terms(&self, x: &[S], q: S) -> (S, S) {
        debug_assert_eq!(x.len(), self.w.len());
        let mut den = self.w_home;
        for (wh, xh) in self.w.iter().zip(x) {
            den += *wh * *xh;
        }
        let mut norm2 = real::<S>(4.0) * self.d_max * self.w_home;
        for ((wh, dh), xh) in self.w.iter().zip(&self.d).zip(x) {
            let coef2 = real::<S>(4.0) * (self.d_max - *dh) * *wh;
            norm2 += coef2 * *xh * *xh;
        }
        let tail = den - self.d_max + q;
        norm2 += tail * tail;
        (norm2.sqrt(), den + self.d_max - q)
    }
}
