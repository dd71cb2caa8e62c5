//! Joint log-likelihood and log-prior evaluation on cached designs.

use crate::error::{Error, Result};
use crate::jointmodel::frame::{HazardPoint, ModelFrame, SubjectDesign};
use crate::jointmodel::params::Params;
use crate::jointmodel::spec::PriorSpec;
use crate::numerics::spline::dot;

/// Borrowed view of the θ components the likelihood needs (the covariance D
/// enters only through the random-effects prior, handled by the sampler).
#[derive(Debug, Clone, Copy)]
pub struct ThetaView<'a> {
    pub beta: &'a [f64],
    pub sigma: f64,
    pub gamma_h0: &'a [f64],
    pub gamma: &'a [f64],
    pub alpha: &'a [f64],
}

impl Params {
    pub fn view(&self) -> ThetaView<'_> {
        ThetaView {
            beta: self.beta.as_slice(),
            sigma: self.sigma(),
            gamma_h0: self.gamma_h0.as_slice(),
            gamma: self.gamma.as_slice(),
            alpha: self.alpha.as_slice(),
        }
    }
}

impl crate::jointmodel::params::ThetaDraw {
    pub fn view(&self) -> ThetaView<'_> {
        ThetaView {
            beta: &self.beta,
            sigma: self.sigma,
            gamma_h0: &self.gamma_h0,
            gamma: &self.gamma,
            alpha: &self.alpha,
        }
    }
}

/// Log-hazard at one cached point:
/// B(t)ᵀγ_h0 + w_hazᵀγ + Σ_f α_f·(x_fᵀβ + z_fᵀb) + α_REᵀb.
pub fn log_hazard_at(
    frame: &ModelFrame,
    theta: &ThetaView,
    b: &[f64],
    w_haz: &[f64],
    point: &HazardPoint,
) -> f64 {
    let mut lh = dot(&point.baseline_row, theta.gamma_h0) + dot(w_haz, theta.gamma);
    for (f, &(off, len)) in frame.alpha_spans.iter().enumerate() {
        if len == 1 {
            let feature = dot(&point.form_x[f], theta.beta) + dot(&point.form_z[f], b);
            lh += theta.alpha[off] * feature;
        } else {
            // Random-effects form: αᵀb.
            lh += dot(&theta.alpha[off..off + len], b);
        }
    }
    lh
}

/// Cumulative hazard Σ w·exp(log-hazard) over cached quadrature points.
pub fn cumulative_hazard_points(
    frame: &ModelFrame,
    theta: &ThetaView,
    b: &[f64],
    w_haz: &[f64],
    points: &[HazardPoint],
) -> f64 {
    let mut acc = 0.0;
    for p in points {
        acc += p.weight * log_hazard_at(frame, theta, b, w_haz, p).exp();
    }
    acc
}

/// Cumulative hazard over an arbitrary interval (builds rows on the fly).
pub fn cumulative_hazard(
    frame: &ModelFrame,
    theta: &ThetaView,
    b: &[f64],
    covs: &[f64],
    t0: f64,
    t1: f64,
) -> Result<f64> {
    let points = frame.interval_points(covs, t0, t1)?;
    let w_haz: Vec<f64> = frame.haz_cov_idx.iter().map(|&i| covs[i]).collect();
    Ok(cumulative_hazard_points(frame, theta, b, &w_haz, &points))
}

/// Per-subject log-likelihood pieces.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubjectLl {
    pub long: f64,
    pub surv: f64,
    /// Longitudinal residual sum of squares (for cheap σ updates).
    pub ssr: f64,
}

impl SubjectLl {
    pub fn total(&self) -> f64 {
        self.long + self.surv
    }
}

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

/// Longitudinal Gaussian log-likelihood from a cached residual sum of squares.
pub fn long_ll_from_ssr(ssr: f64, n_obs: usize, sigma: f64) -> f64 {
    -(n_obs as f64) * (sigma.ln() + HALF_LOG_2PI) - ssr / (2.0 * sigma * sigma)
}

/// Full subject log-likelihood:
/// Σ_l log N(y_l; η(t_l), σ) + δ·log h(T) − Λ(0, T).
pub fn subject_loglik(
    frame: &ModelFrame,
    design: &SubjectDesign,
    theta: &ThetaView,
    b: &[f64],
) -> SubjectLl {
    let p = frame.p();
    let q = frame.q();
    let mut ssr = 0.0;
    for l in 0..design.n_obs {
        let eta = dot(&design.x_long[l * p..(l + 1) * p], theta.beta)
            + dot(&design.z_long[l * q..(l + 1) * q], b);
        let r = design.y[l] - eta;
        ssr += r * r;
    }
    let long = long_ll_from_ssr(ssr, design.n_obs, theta.sigma);
    let lambda = cumulative_hazard_points(frame, theta, b, &design.w_haz, &design.quad);
    let mut surv = -lambda;
    if let Some(ev) = &design.at_event {
        surv += log_hazard_at(frame, theta, b, &design.w_haz, ev);
    }
    SubjectLl { long, surv, ssr }
}

/// Log-prior of σ in the log-σ parameterization: inverse-Gamma(a, b) on σ²
/// plus the |dσ²/d log σ| = 2σ² Jacobian.
pub fn log_prior_log_sigma(log_sigma: f64, priors: &PriorSpec) -> f64 {
    let v = (2.0 * log_sigma).exp();
    let (a, b) = (priors.sigma2_shape, priors.sigma2_rate);
    -(a + 1.0) * v.ln() - b / v + (2.0f64).ln() + 2.0 * log_sigma
}

/// Penalized log-prior of the baseline coefficients given τ:
/// (ρ(K)/2)·log τ − (τ/2)·γᵀKγ, plus a proper normal prior on the
/// penalty null-space component.
pub fn log_prior_gamma_h0(
    frame: &ModelFrame,
    gamma_h0: &[f64],
    tau: f64,
    priors: &PriorSpec,
) -> f64 {
    let rho = frame.penalty.rank as f64;
    let quad = frame.penalty.quad_form(gamma_h0);
    let null_sq = frame.penalty.null_projection_sq(gamma_h0);
    0.5 * rho * tau.ln() - 0.5 * tau * quad
        - null_sq / (2.0 * priors.gamma_h0_null_sd * priors.gamma_h0_null_sd)
}

fn normal_kernel_sum(v: &[f64], sd: f64) -> f64 {
    let mut acc = 0.0;
    for &x in v {
        acc += -0.5 * (x / sd) * (x / sd) - sd.ln() - HALF_LOG_2PI;
    }
    acc
}

/// Total log-prior of θ (up to additive constants independent of θ).
pub fn log_prior(frame: &ModelFrame, priors: &PriorSpec, params: &Params) -> Result<f64> {
    params.validate()?;
    priors.validate()?;
    let mut lp = 0.0;
    lp += normal_kernel_sum(params.beta.as_slice(), priors.beta_sd);
    lp += normal_kernel_sum(params.gamma.as_slice(), priors.gamma_sd);
    lp += normal_kernel_sum(params.alpha.as_slice(), priors.alpha_sd);
    lp += log_prior_log_sigma(params.log_sigma, priors);
    lp += log_prior_gamma_h0(frame, params.gamma_h0.as_slice(), params.tau, priors);
    // Gamma(a, rate) hyper-prior on τ.
    lp += (priors.tau_shape - 1.0) * params.tau.ln() - priors.tau_rate * params.tau;
    lp += params.d.log_prior(priors);
    if !lp.is_finite() {
        return Err(Error::numerical("log-prior is not finite at the given θ"));
    }
    Ok(lp)
}
