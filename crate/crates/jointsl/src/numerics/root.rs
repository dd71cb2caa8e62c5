//! Brent's method for one-dimensional root finding, plus the geometric
//! bracket expansion used by event-time inversion.

use crate::error::{Error, Result};

/// Finds a root of `f` in `[lo, hi]` by Brent's method.
///
/// Requires a sign change (or a zero endpoint). Terminates when the bracket
/// width falls below `tol` (plus a machine-precision floor) or an exact zero
/// is hit.
pub fn brent_root(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::invalid(format!(
            "root bracket [{lo}, {hi}] is not an ordered finite pair"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::numerical(format!(
            "function is not finite at the bracket endpoints: f({a})={fa}, f({b})={fb}"
        )));
    }
    if fa * fb > 0.0 {
        return Err(Error::numerical(format!(
            "no sign change on [{a}, {b}]: f({a})={fa}, f({b})={fb}"
        )));
    }
    // Classic Brent: c shadows the previous iterate, (a,b) brackets the root
    // with |f(b)| <= |f(a)|.
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Attempt inverse quadratic interpolation (secant when a == c).
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * q0 * (q0 - r) - (b - a) * (r - 1.0));
                q = (q0 - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::numerical(format!(
                "function became non-finite at {b} during root refinement"
            )));
        }
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(Error::numerical(
        "root refinement did not converge within 200 iterations".to_string(),
    ))
}

/// Expands `[lo, hi]` geometrically (doubling the width) until `f` changes
/// sign or `cap` is reached. Returns the bracketing pair, or `None` when the
/// sign never changes below the cap (the caller decides what that means —
/// e.g. administrative censoring at the horizon).
pub fn expand_bracket_upper(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi0: f64,
    cap: f64,
) -> Option<(f64, f64)> {
    let f_lo = f(lo);
    let mut hi = hi0.min(cap);
    let mut prev = lo;
    for _ in 0..128 {
        let f_hi = f(hi);
        if f_lo * f_hi <= 0.0 {
            return Some((prev, hi));
        }
        if hi >= cap {
            return None;
        }
        prev = hi;
        hi = (hi * 2.0).min(cap);
    }
    None
}
