//! B-spline bases via the Cox–de Boor recursion.
//!
//! A [`SplineBasis`] is defined by a degree, a pair of boundary knots, and a
//! strictly increasing set of interior knots. The number of basis functions
//! is `interior + degree + 1`, the basis is a partition of unity on the
//! closed boundary interval, and the derivative basis is available for
//! degrees ≥ 1.

use crate::error::{Error, Result};

/// A univariate B-spline basis on a bounded interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    /// Full padded knot vector: `degree + 1` copies of each boundary knot
    /// surrounding the interior knots.
    knots: Vec<f64>,
    num_basis: usize,
    lo: f64,
    hi: f64,
}

impl SplineBasis {
    /// Builds a basis of the given degree with boundary knots `(lo, hi)` and
    /// the supplied strictly increasing interior knots in `(lo, hi)`.
    pub fn new(degree: usize, interior: &[f64], boundary: (f64, f64)) -> Result<Self> {
        let (lo, hi) = boundary;
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::invalid(format!(
                "spline boundary must be a finite increasing pair, got ({lo}, {hi})"
            )));
        }
        if degree > 10 {
            return Err(Error::invalid(format!(
                "spline degree {degree} exceeds the supported maximum of 10"
            )));
        }
        let mut prev = lo;
        for &k in interior {
            if !k.is_finite() || k <= prev {
                return Err(Error::invalid(format!(
                    "interior knots must be finite, strictly increasing, and inside \
                     the boundary; offending knot {k}"
                )));
            }
            prev = k;
        }
        if prev >= hi {
            return Err(Error::invalid(format!(
                "interior knot {prev} is not below the upper boundary {hi}"
            )));
        }
        let mut knots = Vec::with_capacity(interior.len() + 2 * (degree + 1));
        knots.extend(std::iter::repeat(lo).take(degree + 1));
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat(hi).take(degree + 1));
        let num_basis = interior.len() + degree + 1;
        Ok(Self {
            degree,
            knots,
            num_basis,
            lo,
            hi,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn boundary(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.knots.len() - self.degree - 1]
    }

    /// Index `mu` of the knot span containing `t`: `knots[mu] <= t < knots[mu+1]`,
    /// with `t == hi` mapped to the last non-empty span (`num_basis - 1`).
    fn span(&self, t: f64) -> usize {
        if t >= self.hi {
            return self.num_basis - 1;
        }
        // Binary search for the largest valid span start with knots[mu] <= t.
        let mut lo = self.degree;
        let mut hi = self.num_basis; // exclusive: knots[num_basis] is the upper boundary
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < self.lo || t > self.hi {
            return Err(Error::invalid(format!(
                "evaluation point {t} is outside the spline boundary [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Evaluates all basis functions at `t` (inside the boundary interval).
    ///
    /// The returned vector has length [`num_basis`](Self::num_basis), its
    /// entries are non-negative and sum to one.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        self.check_domain(t)?;
        let mut out = vec![0.0; self.num_basis];
        self.eval_into(t, &mut out);
        Ok(out)
    }

    /// Evaluates the basis at `t` clamped into the boundary interval.
    ///
    /// Used where the model extrapolates by freezing the boundary value
    /// rather than erroring (e.g. hazard evaluation beyond the training
    /// range).
    pub fn eval_clamped(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_basis];
        self.eval_into(t.clamp(self.lo, self.hi), &mut out);
        out
    }

    /// Writes the basis values at `t` (already inside the boundary) into
    /// `out`, which must have length `num_basis`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_basis);
        out.fill(0.0);
        let t = t.clamp(self.lo, self.hi);
        let mu = self.span(t);
        let d = self.degree;
        // Cox–de Boor triangular recursion over the d+1 basis functions that
        // are non-zero on span mu: indices mu-d ..= mu.
        let mut n = [0.0f64; 16];
        debug_assert!(d + 1 <= n.len());
        n[0] = 1.0;
        for k in 1..=d {
            let mut saved = 0.0;
            for r in 0..k {
                // Basis index is mu - k + 1 + r at level k.
                let i = mu + 1 + r - k;
                let left = self.knots[i + k] - self.knots[i];
                let term = if left > 0.0 { n[r] / left } else { 0.0 };
                n[r] = saved + (self.knots[i + k] - t) * term;
                saved = (t - self.knots[i]) * term;
            }
            n[k] = saved;
        }
        for (r, &value) in n.iter().enumerate().take(d + 1) {
            out[mu - d + r] = value;
        }
    }

    /// Evaluates the first derivative of every basis function at `t`.
    ///
    /// Errors for degree-0 bases, whose derivative is not defined as a
    /// function.
    pub fn deriv(&self, t: f64) -> Result<Vec<f64>> {
        if self.degree == 0 {
            return Err(Error::invalid(
                "derivative of a degree-0 spline basis is unsupported".to_string(),
            ));
        }
        self.check_domain(t)?;
        let mut out = vec![0.0; self.num_basis];
        self.deriv_into(t, &mut out);
        Ok(out)
    }

    /// Derivative basis at `t` clamped into the boundary interval; with the
    /// clamped-extrapolation convention the fitted curve is constant outside
    /// the boundary, so the derivative there is zero.
    pub fn deriv_clamped(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_basis];
        if t < self.lo || t > self.hi {
            return out;
        }
        self.deriv_into(t, &mut out);
        out
    }

    /// Writes derivative values at `t` (inside the boundary) into `out`.
    /// Degree must be ≥ 1.
    pub fn deriv_into(&self, t: f64, out: &mut [f64]) {
        debug_assert!(self.degree >= 1);
        debug_assert_eq!(out.len(), self.num_basis);
        out.fill(0.0);
        let t = t.clamp(self.lo, self.hi);
        let d = self.degree;
        // dB_{i,d}/dt = d * [ B_{i,d-1}/(k_{i+d}-k_i) - B_{i+1,d-1}/(k_{i+d+1}-k_{i+1}) ].
        // Evaluate the degree-(d-1) basis on the same knot vector.
        let mu = self.span(t);
        let mut n = [0.0f64; 16];
        n[0] = 1.0;
        for k in 1..=(d - 1) {
            let mut saved = 0.0;
            for r in 0..k {
                let i = mu + 1 + r - k;
                let left = self.knots[i + k] - self.knots[i];
                let term = if left > 0.0 { n[r] / left } else { 0.0 };
                n[r] = saved + (self.knots[i + k] - t) * term;
                saved = (t - self.knots[i]) * term;
            }
            n[k] = saved;
        }
        // Lower-degree basis index j = mu-(d-1)+r is non-zero; distribute into
        // the derivative formula for full-degree indices i = j-? :
        // B_{j,d-1} contributes +d/(k_{j+d}-k_j) to B'_{j,d} and
        // -d/(k_{j+d}-k_j) to B'_{j-1,d}.
        for r in 0..d {
            let j = mu + 1 + r - d; // index of the degree-(d-1) function
            let denom = self.knots[j + d] - self.knots[j];
            if denom <= 0.0 {
                continue;
            }
            let v = self.degree as f64 * n[r] / denom;
            out[j] += v;
            if j >= 1 {
                out[j - 1] -= v;
            }
        }
    }

    /// Dot product of the basis at `t` with a coefficient vector.
    pub fn value(&self, coefs: &[f64], t: f64) -> Result<f64> {
        let b = self.eval(t)?;
        Ok(dot(&b, coefs))
    }
}

/// Plain dense dot product helper shared by the design-matrix code.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s = a[i].mul_add(b[i], s);
    }
    s
}
