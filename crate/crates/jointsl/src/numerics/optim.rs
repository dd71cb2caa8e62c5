//! Simplex-constrained minimization utilities: a numerically stable softmax
//! and a restart-friendly Nelder–Mead simplex minimizer.

use crate::error::{Error, Result};

/// log(Σ exp(v_i)) computed stably.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Maps a real vector onto the open probability simplex.
///
/// Shift-invariant and strictly positive; errors on non-finite input.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::invalid("softmax input must be non-empty"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!(
            "softmax input must be finite, got {v:?}"
        )));
    }
    let lse = log_sum_exp(v);
    // Guard against underflow so the result stays in the *open* simplex even
    // for extreme logit gaps.
    Ok(v
        .iter()
        .map(|&x| (x - lse).exp().max(f64::MIN_POSITIVE))
        .collect())
}

/// Outcome of a Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    /// Best point found.
    pub x: Vec<f64>,
    /// Objective value at `x`; never exceeds the objective at the start.
    pub f: f64,
    /// Iterations consumed.
    pub iterations: usize,
    /// Whether the simplex collapsed below tolerance (as opposed to hitting
    /// the iteration cap).
    pub converged: bool,
}

/// Minimizes `objective` from `x0` by the Nelder–Mead simplex method.
///
/// Convergence is declared when the simplex diameter or the spread of
/// objective values falls below `tol`. Non-finite objective values during
/// the search are treated as rejected proposals (+∞); a non-finite value at
/// the starting point is an error.
pub fn nelder_mead_min(
    mut objective: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<NelderMeadResult> {
    if x0.is_empty() {
        return Err(Error::invalid("optimizer needs at least one dimension"));
    }
    let n = x0.len();
    let f0 = objective(x0);
    if !f0.is_finite() {
        return Err(Error::invalid(format!(
            "objective is not finite at the starting point (value {f0})"
        )));
    }
    let mut eval = |x: &[f64]| -> f64 {
        let v = objective(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // Initial simplex: perturb each coordinate.
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut fvals: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    fvals.push(f0);
    for i in 0..n {
        let mut x = x0.to_vec();
        let step = if x[i].abs() > 1.0 { 0.1 * x[i].abs() } else { 0.25 };
        x[i] += step;
        fvals.push(eval(&x));
        simplex.push(x);
    }

    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut best_ever = simplex[0].clone();
    let mut f_best_ever = fvals[0];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        // Order vertices by objective value.
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap_or(std::cmp::Ordering::Equal));
        let reorder = |v: &mut Vec<Vec<f64>>, f: &mut Vec<f64>, idx: &[usize]| {
            let nv: Vec<Vec<f64>> = idx.iter().map(|&i| v[i].clone()).collect();
            let nf: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
            *v = nv;
            *f = nf;
        };
        reorder(&mut simplex, &mut fvals, &idx);

        if fvals[0] < f_best_ever {
            f_best_ever = fvals[0];
            best_ever = simplex[0].clone();
        }

        // Convergence: simplex diameter and objective spread both below tol.
        // (Spread alone is not trustworthy — vertices can straddle a kink
        // with equal values while the simplex is still wide.)
        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = if fvals[n].is_finite() {
            fvals[n] - fvals[0]
        } else {
            f64::INFINITY
        };
        if diameter < tol && spread <= tol.max(f64::EPSILON * fvals[0].abs()) {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }

        let lerp = |from: &[f64], towards: &[f64], t: f64| -> Vec<f64> {
            from.iter()
                .zip(towards)
                .map(|(&a, &b)| a + t * (b - a))
                .collect()
        };

        // Reflection.
        let xr = lerp(&centroid, &simplex[n], -ALPHA);
        let fr = eval(&xr);
        if fr < fvals[0] {
            // Expansion.
            let xe = lerp(&centroid, &simplex[n], -GAMMA);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                fvals[n] = fe;
            } else {
                simplex[n] = xr;
                fvals[n] = fr;
            }
            continue;
        }
        if fr < fvals[n - 1] {
            simplex[n] = xr;
            fvals[n] = fr;
            continue;
        }
        // Contraction (outside when the reflected point improved on the
        // worst, inside otherwise).
        let (xc, fc) = if fr < fvals[n] {
            let xc = lerp(&centroid, &xr, RHO);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = lerp(&centroid, &simplex[n], RHO);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fvals[n].min(fr) {
            simplex[n] = xc;
            fvals[n] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = lerp(&best, &simplex[i], SIGMA);
            fvals[i] = eval(&simplex[i]);
        }
    }

    // Account for any final improvement after the last reorder.
    for (v, &fv) in simplex.iter().zip(&fvals) {
        if fv < f_best_ever {
            f_best_ever = fv;
            best_ever = v.clone();
        }
    }
    Ok(NelderMeadResult {
        x: best_ever,
        f: f_best_ever,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_symmetry() {
        let w = softmax(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        for &x in &w {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_log3_ratio() {
        let c = -1.7;
        let w = softmax(&[c, c + 3.0f64.ln()]).unwrap();
        assert_abs_diff_eq!(w[0], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 0.75, epsilon = 1e-14);
    }

    #[test]
    fn softmax_shift_invariance() {
        let v = [0.3, -2.0, 1.1, 4.0];
        let a = softmax(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + 7.3).collect();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn softmax_extreme_logits_stay_normalized() {
        let w = softmax(&[800.0, -800.0, 0.0]).unwrap();
        let s: f64 = w.iter().sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(softmax(&[1.0, f64::NAN]).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0]).is_err());
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead_min(
            |x| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2),
            &[0.0, 0.0],
            1e-10,
            2000,
        )
        .unwrap();
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[1], 2.0, epsilon = 1e-5);
        assert!(r.f < 1e-9);
        assert!(r.converged);
    }

    #[test]
    fn one_dimensional_absolute_value() {
        let r = nelder_mead_min(|x| (x[0] - 3.0).abs(), &[0.0], 1e-9, 2000).unwrap();
        assert_abs_diff_eq!(r.x[0], 3.0, epsilon = 1e-6);
    }

    #[test]
    fn rosenbrock_reaches_global_minimum() {
        let rosen = |x: &[f64]| {
            let a = 1.0 - x[0];
            let b = x[1] - x[0] * x[0];
            a * a + 100.0 * b * b
        };
        let r = nelder_mead_min(rosen, &[-1.2, 1.0], 1e-9, 5000).unwrap();
        assert!(r.f < 1e-6, "f* = {}", r.f);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-2);
        assert_abs_diff_eq!(r.x[1], 1.0, epsilon = 1e-2);
    }

    #[test]
    fn never_worse_than_start() {
        // Even with a hostile objective full of non-finite holes, the result
        // must not exceed the starting value.
        let nasty = |x: &[f64]| {
            if x[0] > 0.3 {
                f64::NAN
            } else {
                x[0] * x[0]
            }
        };
        let r = nelder_mead_min(nasty, &[0.2, 0.0], 1e-8, 200).unwrap();
        assert!(r.f <= 0.04 + 1e-12);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        assert!(nelder_mead_min(|_| f64::NAN, &[0.0], 1e-8, 10).is_err());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let r = nelder_mead_min(
            |x| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2),
            &[50.0, -30.0],
            1e-16,
            3,
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
