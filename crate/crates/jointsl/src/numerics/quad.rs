//! Gauss–Legendre quadrature.
//!
//! Nodes and weights are computed once per rule order by Newton iteration on
//! the Legendre polynomial, cached process-wide, and reused for every hazard
//! integral. The default rule has 15 nodes (exact for polynomials up to
//! degree 29); long intervals are split into at most two panels by the
//! callers that integrate hazards.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// A fixed-order Gauss–Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the `n`-node rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("quadrature rule needs at least one node"));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // Exploit symmetry: compute the non-negative roots.
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev-style initial guess for the i-th root (descending).
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_deriv(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(Self { nodes, weights })
    }

    /// The process-wide default 15-node rule.
    pub fn default15() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(15).expect("15-node rule"))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Abscissas mapped onto `[a, b]` together with their scaled weights.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        if !(a.is_finite() && b.is_finite()) || a > b {
            return Err(Error::invalid(format!(
                "integration interval [{a}, {b}] is not an ordered finite pair"
            )));
        }
        if a == b {
            return Ok(0.0);
        }
        let mut acc = 0.0;
        for (t, w) in self.mapped(a, b) {
            acc += w * f(t);
        }
        Ok(acc)
    }

    /// Integrates `f` over `[a, b]` split into `panels` equal panels.
    pub fn integrate_panels(
        &self,
        mut f: impl FnMut(f64) -> f64,
        a: f64,
        b: f64,
        panels: usize,
    ) -> Result<f64> {
        if panels == 0 {
            return Err(Error::invalid("panel count must be positive"));
        }
        if !(a.is_finite() && b.is_finite()) || a > b {
            return Err(Error::invalid(format!(
                "integration interval [{a}, {b}] is not an ordered finite pair"
            )));
        }
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = a + h * p as f64;
            let hi = if p + 1 == panels { b } else { lo + h };
            acc += self.integrate(&mut f, lo, hi)?;
        }
        Ok(acc)
    }
}

/// Convenience wrapper: the default 15-node rule on `[a, b]`.
pub fn gauss_legendre15(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    GaussLegendre::default15().integrate(f, a, b)
}

/// Number of panels used for hazard integrals over `[a, b]` given the
/// dataset's follow-up range: 2 when the interval exceeds half the range,
/// otherwise 1.
pub fn hazard_panels(a: f64, b: f64, follow_up_range: f64) -> usize {
    if (b - a) > 0.5 * follow_up_range {
        2
    } else {
        1
    }
}

/// Evaluates (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn x_squared_on_unit_interval() {
        let v = gauss_legendre15(|x| x * x, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_on_two_to_five() {
        let v = gauss_legendre15(|_| 1.0, 2.0, 5.0).unwrap();
        assert_abs_diff_eq!(v, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn exponential_against_antiderivative() {
        let v = gauss_legendre15(f64::exp, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn polynomial_exactness_up_to_degree_29() {
        // ∫_0^1 x^k dx = 1/(k+1); 15 nodes are exact through degree 29.
        for k in 0..=29u32 {
            let v = gauss_legendre15(|x| x.powi(k as i32), 0.0, 1.0).unwrap();
            let want = 1.0 / (k as f64 + 1.0);
            assert!(
                (v - want).abs() <= 1e-12 * want.max(1.0),
                "degree {k}: got {v}, want {want}"
            );
        }
    }

    #[test]
    fn reversed_interval_is_a_domain_error() {
        assert!(gauss_legendre15(|x| x, 1.0, 0.0).is_err());
        assert!(gauss_legendre15(|x| x, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn degenerate_interval_is_zero() {
        assert_eq!(gauss_legendre15(|x| x * x, 2.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn panels_agree_with_single_rule_on_smooth_functions() {
        let rule = GaussLegendre::default15();
        let one = rule.integrate(|x| (0.3 * x).sin() + x, 0.0, 8.0).unwrap();
        let two = rule
            .integrate_panels(|x| (0.3 * x).sin() + x, 0.0, 8.0, 2)
            .unwrap();
        assert_abs_diff_eq!(one, two, epsilon = 1e-10);
    }

    #[test]
    fn nodes_and_weights_are_symmetric_and_normalized() {
        for n in [5, 15, 21] {
            let r = GaussLegendre::new(n).unwrap();
            let total: f64 = r.weights.iter().sum();
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
            for i in 0..n {
                assert_abs_diff_eq!(r.nodes[i], -r.nodes[n - 1 - i], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn fifteen_node_rule_matches_published_extremes() {
        // Largest abscissa and its weight for the 15-point rule.
        let r = GaussLegendre::new(15).unwrap();
        assert_abs_diff_eq!(r.nodes[14], 0.987992518020485, epsilon = 1e-12);
        assert_abs_diff_eq!(r.weights[14], 0.030753241996117, epsilon = 1e-12);
        // Central node of an odd rule is exactly zero.
        assert_abs_diff_eq!(r.nodes[7], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[7], 0.202578241925561, epsilon = 1e-12);
    }

    #[test]
    fn panel_selector_splits_long_intervals() {
        assert_eq!(hazard_panels(0.0, 3.0, 25.0), 1);
        assert_eq!(hazard_panels(0.0, 12.4, 25.0), 1);
        assert_eq!(hazard_panels(0.0, 12.6, 25.0), 2);
        assert_eq!(hazard_panels(5.0, 25.0, 25.0), 2);
    }
}
