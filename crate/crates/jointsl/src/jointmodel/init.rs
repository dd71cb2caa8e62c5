//! Chain initialization: pooled least squares for (β, σ) and a penalized
//! null (biomarker-free) spline-hazard fit for γ_h0.

use crate::error::{Error, Result};
use crate::jointmodel::frame::{ModelFrame, SubjectDesign};
use crate::jointmodel::params::{DParam, Params};
use nalgebra::{DMatrix, DVector};

/// Pooled ordinary least squares of all measurements on the fixed design
/// x(t), ignoring random effects; returns (β̂, σ̂) with σ̂ floored at 1e-3.
pub fn pooled_ols(frame: &ModelFrame, designs: &[SubjectDesign]) -> Result<(DVector<f64>, f64)> {
    let p = frame.p();
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    let mut n_total = 0usize;
    for d in designs {
        for l in 0..d.n_obs {
            let row = &d.x_long[l * p..(l + 1) * p];
            for a in 0..p {
                xty[a] += row[a] * d.y[l];
                for b in 0..p {
                    xtx[(a, b)] += row[a] * row[b];
                }
            }
            n_total += 1;
        }
    }
    // Small ridge for rank safety (e.g. sparse spline regions).
    for a in 0..p {
        xtx[(a, a)] += 1e-8 * (1.0 + xtx[(a, a)]);
    }
    let beta = xtx
        .cholesky()
        .ok_or_else(|| Error::numerical("pooled least-squares design is singular"))?
        .solve(&xty);
    let mut ssr = 0.0;
    for d in designs {
        for l in 0..d.n_obs {
            let row = &d.x_long[l * p..(l + 1) * p];
            let mut eta = 0.0;
            for a in 0..p {
                eta += row[a] * beta[a];
            }
            ssr += (d.y[l] - eta).powi(2);
        }
    }
    let dof = (n_total.saturating_sub(p)).max(1) as f64;
    let sigma = (ssr / dof).sqrt().max(1e-3);
    Ok((beta, sigma))
}

/// Penalized maximum-likelihood fit of the null spline hazard
/// Σ_i [δ_i B(T_i)ᵀγ − ∫₀^{T_i} exp(B(s)ᵀγ) ds] − (τ₀/2)γᵀKγ with τ₀ = 1,
/// by Newton iterations with step halving, started at the constant crude
/// log-rate. Falls back to the crude constant if Newton stalls.
pub fn null_hazard_fit(frame: &ModelFrame, designs: &[SubjectDesign]) -> DVector<f64> {
    let p = frame.n_baseline();
    let n_events: f64 = designs.iter().filter(|d| d.event).count() as f64;
    let total_time: f64 = designs.iter().map(|d| d.obs_time).sum();
    let crude = if n_events > 0.0 && total_time > 0.0 {
        (n_events / total_time).ln()
    } else {
        -4.0
    };
    // Partition of unity: constant coefficients give a constant log-hazard.
    let mut gamma = DVector::from_element(p, crude);
    let tau0 = 1.0;
    let objective = |g: &DVector<f64>| -> f64 {
        let mut obj = 0.0;
        for d in designs {
            if let Some(ev) = &d.at_event {
                let mut lh = 0.0;
                for (a, &ba) in ev.baseline_row.iter().enumerate() {
                    lh += ba * g[a];
                }
                obj += lh;
            }
            for pt in &d.quad {
                let mut lh = 0.0;
                for (a, &ba) in pt.baseline_row.iter().enumerate() {
                    lh += ba * g[a];
                }
                obj -= pt.weight * lh.exp();
            }
        }
        obj - 0.5 * tau0 * frame.penalty.quad_form(g.as_slice())
    };
    let mut f_cur = objective(&gamma);
    if !f_cur.is_finite() {
        return gamma;
    }
    for _ in 0..25 {
        // Gradient and Hessian.
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for d in designs {
            if let Some(ev) = &d.at_event {
                for (a, &ba) in ev.baseline_row.iter().enumerate() {
                    grad[a] += ba;
                }
            }
            for pt in &d.quad {
                let mut lh = 0.0;
                for (a, &ba) in pt.baseline_row.iter().enumerate() {
                    lh += ba * gamma[a];
                }
                let wh = pt.weight * lh.exp();
                for (a, &ba) in pt.baseline_row.iter().enumerate() {
                    grad[a] -= wh * ba;
                    for (b2, &bb) in pt.baseline_row.iter().enumerate() {
                        hess[(a, b2)] += wh * ba * bb;
                    }
                }
            }
        }
        for a in 0..p {
            for b2 in 0..p {
                grad[a] -= tau0 * frame.penalty.k[(a, b2)] * gamma[b2];
                hess[(a, b2)] += tau0 * frame.penalty.k[(a, b2)];
            }
            hess[(a, a)] += 1e-8;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => break,
        };
        // Step halving on the (maximized) objective.
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = &gamma + scale * &step;
            let f_new = objective(&cand);
            if f_new.is_finite() && f_new >= f_cur - 1e-12 {
                let delta = f_new - f_cur;
                gamma = cand;
                f_cur = f_new;
                improved = true;
                if delta.abs() < 1e-10 * (1.0 + f_cur.abs()) {
                    return gamma;
                }
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    gamma
}

/// Full initial parameter vector: two-stage least squares for (β, σ), null
/// hazard for γ_h0, zeros for (γ, α, b), identity-scaled D, τ = 1.
pub fn initial_params(frame: &ModelFrame, designs: &[SubjectDesign]) -> Result<Params> {
    let (beta, sigma) = pooled_ols(frame, designs)?;
    let gamma_h0 = null_hazard_fit(frame, designs);
    Ok(Params {
        beta,
        log_sigma: sigma.ln(),
        gamma_h0,
        gamma: DVector::zeros(frame.n_gamma()),
        alpha: DVector::zeros(frame.n_alpha()),
        d: DParam::identity(frame.q()),
        tau: 1.0,
    })
}
