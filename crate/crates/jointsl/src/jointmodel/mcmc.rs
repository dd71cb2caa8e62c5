//! Metropolis-within-Gibbs sampler for the joint model.
//!
//! Blocks: (β), (log σ), (γ_h0), (γ, α), each b_i, the covariance D in its
//! log-radius/angle parameterization, and an exact Gibbs draw for τ. All
//! random-walk blocks use adaptive proposal scales targeting 0.234
//! acceptance, adapted in batches of 50 during burn-in only.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::jointmodel::frame::{ModelFrame, ResolvedBases, SubjectDesign};
use crate::jointmodel::init::initial_params;
use crate::jointmodel::likelihood::{
    cumulative_hazard_points, log_hazard_at, log_prior_gamma_h0, log_prior_log_sigma,
    long_ll_from_ssr, subject_loglik, SubjectLl, ThetaView,
};
use crate::jointmodel::params::{DParam, Params, ThetaDraw};
use crate::jointmodel::spec::{JointModelSpec, PriorSpec};
use crate::numerics::mvn::MvnFactor;
use crate::streams::{self, tags};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

/// MCMC run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Fixes σ (skips its block); used by conjugate oracles.
    pub fix_sigma: Option<f64>,
    /// Fixes D to a given row-major q×q matrix (skips its block).
    pub fix_d: Option<Vec<f64>>,
    /// Store per-subject random-effect draws alongside θ.
    pub store_random_effects: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 6000,
            burn_in: 3000,
            thin: 3,
            seed: 0,
            fix_sigma: None,
            fix_d: None,
            store_random_effects: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::invalid(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thinning interval must be ≥ 1"));
        }
        if let Some(s) = self.fix_sigma {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid("fixed σ must be positive"));
            }
        }
        Ok(())
    }

    /// Number of draws the run will store.
    pub fn n_draws(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// Reproducibility metadata stored with the draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub model_name: String,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_subjects: usize,
    pub resolved: ResolvedBases,
}

/// Posterior draws plus acceptance diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub thetas: Vec<ThetaDraw>,
    /// Per stored draw: n·q row-major random effects (when requested).
    pub random_effects: Option<Vec<Vec<f64>>>,
    /// Post-burn-in acceptance rate per Metropolis block.
    pub acceptance: Vec<(String, f64)>,
    pub meta: ChainMeta,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return Err(Error::invalid("posterior draws must be non-empty"));
        }
        for t in &self.thetas {
            t.validate()?;
        }
        if let Some(re) = &self.random_effects {
            if re.len() != self.thetas.len() {
                return Err(Error::invalid(
                    "random-effect draws out of step with θ draws",
                ));
            }
        }
        Ok(())
    }
}

/// Adaptive proposal scale: Robbins–Monro on the log-scale in batches of 50
/// during burn-in, frozen afterwards.
#[derive(Debug, Clone)]
struct AdaptiveScale {
    log_s: f64,
    batch_accepts: u32,
    batch_attempts: u32,
    batch_index: f64,
    post_accepts: u64,
    post_attempts: u64,
}

const ADAPT_BATCH: u32 = 50;
const TARGET_RATE: f64 = 0.234;

impl AdaptiveScale {
    fn new(initial: f64) -> Self {
        Self {
            log_s: initial.ln(),
            batch_accepts: 0,
            batch_attempts: 0,
            batch_index: 1.0,
            post_accepts: 0,
            post_attempts: 0,
        }
    }

    fn scale(&self) -> f64 {
        self.log_s.exp()
    }

    fn record(&mut self, accepted: bool, adapting: bool) {
        if adapting {
            self.batch_attempts += 1;
            self.batch_accepts += u32::from(accepted);
            if self.batch_attempts == ADAPT_BATCH {
                let rate = f64::from(self.batch_accepts) / f64::from(ADAPT_BATCH);
                self.log_s += (rate - TARGET_RATE) / self.batch_index.sqrt();
                self.log_s = self.log_s.clamp(-10.0, 4.0);
                self.batch_index += 1.0;
                self.batch_accepts = 0;
                self.batch_attempts = 0;
            }
        } else {
            self.post_attempts += 1;
            self.post_accepts += u64::from(accepted);
        }
    }

    fn post_rate(&self) -> f64 {
        if self.post_attempts == 0 {
            0.0
        } else {
            self.post_accepts as f64 / self.post_attempts as f64
        }
    }
}

fn reflect_angle(x: f64) -> f64 {
    let period = 2.0 * std::f64::consts::PI;
    let mut y = x.rem_euclid(period);
    if y > std::f64::consts::PI {
        y = period - y;
    }
    y.clamp(1e-12, std::f64::consts::PI - 1e-12)
}

fn normal_kernel_sum(v: &[f64], sd: f64) -> f64 {
    let mut acc = 0.0;
    for &x in v {
        acc += -0.5 * (x / sd) * (x / sd);
    }
    acc
}

/// Survival part only (baseline/γ/α blocks leave the longitudinal term
/// untouched).
fn subject_surv(
    frame: &ModelFrame,
    design: &SubjectDesign,
    theta: &ThetaView,
    b: &[f64],
) -> f64 {
    let lambda = cumulative_hazard_points(frame, theta, b, &design.w_haz, &design.quad);
    let mut surv = -lambda;
    if let Some(ev) = &design.at_event {
        surv += log_hazard_at(frame, theta, b, &design.w_haz, ev);
    }
    surv
}

fn finite_or_reject(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::NEG_INFINITY
    }
}

/// Exact Gibbs draw of τ | γ_h0 ~ Gamma(a + ρ/2, rate b + γᵀKγ/2).
pub fn gibbs_tau(
    priors: &PriorSpec,
    penalty_rank: usize,
    quad_form: f64,
    rng: &mut impl Rng,
) -> f64 {
    let shape = priors.tau_shape + 0.5 * penalty_rank as f64;
    let rate = priors.tau_rate + 0.5 * quad_form;
    let gamma = Gamma::new(shape, 1.0 / rate).expect("positive Gamma parameters");
    gamma.sample(rng).max(f64::MIN_POSITIVE)
}

struct SamplerState {
    params: Params,
    b: Vec<DVector<f64>>,
    subj_ll: Vec<SubjectLl>,
    /// log N(b_i; 0, D) per subject.
    b_prior: Vec<f64>,
    d_factor: MvnFactor,
}

impl SamplerState {
    fn total_ll(&self) -> f64 {
        self.subj_ll.iter().map(|l| l.total()).sum()
    }

    fn total_b_prior(&self) -> f64 {
        self.b_prior.iter().sum()
    }
}

/// Fits the joint model by Metropolis-within-Gibbs. Deterministic given the
/// seed in `config`.
pub fn fit_mcmc(
    spec: &JointModelSpec,
    priors: &PriorSpec,
    data: &Dataset,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    config.validate()?;
    priors.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("cannot fit a model to an empty dataset"));
    }
    let frame = ModelFrame::new(spec, data)?;
    let designs: Vec<SubjectDesign> = data
        .subjects
        .iter()
        .map(|r| frame.subject_design(r))
        .collect::<Result<_>>()?;
    fit_mcmc_on_frame(&frame, priors, &designs, data.len(), config)
}

/// Inner fitting loop against a pre-resolved frame (used by cross-validation
/// to keep the training-fold frame explicit).
pub fn fit_mcmc_on_frame(
    frame: &ModelFrame,
    priors: &PriorSpec,
    designs: &[SubjectDesign],
    n_subjects: usize,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    config.validate()?;
    let q = frame.q();
    let n = designs.len();
    debug_assert_eq!(n, n_subjects);

    // --- Initialization -------------------------------------------------
    let mut params = initial_params(frame, designs)
        .map_err(|e| Error::numerical(format!("initialization error: least squares — {e}")))?;
    if let Some(s) = config.fix_sigma {
        params.log_sigma = s.ln();
    }
    if let Some(dmat) = &config.fix_d {
        if dmat.len() != q * q {
            return Err(Error::invalid(format!(
                "fixed D has {} entries, expected {}",
                dmat.len(),
                q * q
            )));
        }
        params.d = DParam::from_cov(&DMatrix::from_row_slice(q, q, dmat))?;
    }

    let mut rng = streams::stream(config.seed, &[tags::FIT]);
    let mut state = {
        let d_factor = MvnFactor::new(&params.d.cov())?;
        let b = vec![DVector::zeros(q); n];
        let theta = params.view();
        let subj_ll: Vec<SubjectLl> = designs
            .iter()
            .zip(&b)
            .map(|(d, bi)| subject_loglik(frame, d, &theta, bi.as_slice()))
            .collect();
        let zero_mean = DVector::zeros(q);
        let b_prior: Vec<f64> = b.iter().map(|bi| d_factor.logpdf(bi, &zero_mean)).collect();
        SamplerState {
            params,
            b,
            subj_ll,
            b_prior,
            d_factor,
        }
    };

    // Verify the initial posterior is finite, naming the failing block.
    {
        let long: f64 = state.subj_ll.iter().map(|l| l.long).sum();
        if !long.is_finite() {
            return Err(Error::numerical(
                "initialization error: non-finite longitudinal likelihood",
            ));
        }
        let surv: f64 = state.subj_ll.iter().map(|l| l.surv).sum();
        if !surv.is_finite() {
            return Err(Error::numerical(
                "initialization error: non-finite survival likelihood",
            ));
        }
        let lp = crate::jointmodel::likelihood::log_prior(frame, priors, &state.params)
            .map_err(|e| Error::numerical(format!("initialization error: prior — {e}")))?;
        if !(lp + state.total_b_prior()).is_finite() {
            return Err(Error::numerical(
                "initialization error: non-finite prior at the starting point",
            ));
        }
    }

    // --- Blocks ----------------------------------------------------------
    let p_dim = frame.p();
    let n_gh0 = frame.n_baseline();
    let n_ga = frame.n_gamma() + frame.n_alpha();
    let mut sc_beta = AdaptiveScale::new(0.1);
    let mut sc_sigma = AdaptiveScale::new(0.1);
    let mut sc_gh0 = AdaptiveScale::new(0.1);
    let mut sc_ga = AdaptiveScale::new(0.1);
    let mut sc_d = AdaptiveScale::new(0.1);
    let mut sc_b: Vec<AdaptiveScale> = (0..n).map(|_| AdaptiveScale::new(0.5)).collect();

    let n_draws = config.n_draws();
    let mut thetas = Vec::with_capacity(n_draws);
    let mut random_effects: Option<Vec<Vec<f64>>> = if config.store_random_effects {
        Some(Vec::with_capacity(n_draws))
    } else {
        None
    };

    let zero_mean = DVector::zeros(q);
    let mut cand_ll = vec![SubjectLl::default(); n];

    for it in 0..config.iterations {
        let adapting = it < config.burn_in;

        // -- β block ------------------------------------------------------
        {
            let s = sc_beta.scale();
            let prop = DVector::from_iterator(
                p_dim,
                (0..p_dim).map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    s * z
                }),
            );
            let beta_new = &state.params.beta + prop;
            let theta_new = ThetaView {
                beta: beta_new.as_slice(),
                ..state.params.view()
            };
            let mut cand_total = 0.0;
            for (i, d) in designs.iter().enumerate() {
                cand_ll[i] = subject_loglik(frame, d, &theta_new, state.b[i].as_slice());
                cand_total += cand_ll[i].total();
            }
            let dprior = normal_kernel_sum(beta_new.as_slice(), priors.beta_sd)
                - normal_kernel_sum(state.params.beta.as_slice(), priors.beta_sd);
            let la = finite_or_reject(cand_total - state.total_ll() + dprior);
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let accept = u.ln() < la;
            if accept {
                state.params.beta = beta_new;
                state.subj_ll.copy_from_slice(&cand_ll);
            }
            sc_beta.record(accept, adapting);
        }

        // -- log σ block ----------------------------------------------------
        if config.fix_sigma.is_none() {
            let s = sc_sigma.scale();
            let z: f64 = rng.sample(StandardNormal);
            let phi_new = state.params.log_sigma + s * z;
            let sigma_new = phi_new.exp();
            let mut cand_long = 0.0;
            let mut cur_long = 0.0;
            for l in &state.subj_ll {
                cur_long += l.long;
            }
            for (l, d) in state.subj_ll.iter().zip(designs) {
                cand_long += long_ll_from_ssr(l.ssr, d.n_obs, sigma_new);
            }
            let dprior = log_prior_log_sigma(phi_new, priors)
                - log_prior_log_sigma(state.params.log_sigma, priors);
            let la = finite_or_reject(cand_long - cur_long + dprior);
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let accept = u.ln() < la;
            if accept {
                state.params.log_sigma = phi_new;
                for (l, d) in state.subj_ll.iter_mut().zip(designs) {
                    l.long = long_ll_from_ssr(l.ssr, d.n_obs, sigma_new);
                }
            }
            sc_sigma.record(accept, adapting);
        }

        // -- γ_h0 block -----------------------------------------------------
        {
            let s = sc_gh0.scale();
            let prop = DVector::from_iterator(
                n_gh0,
                (0..n_gh0).map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    s * z
                }),
            );
            let gh0_new = &state.params.gamma_h0 + prop;
            let theta_new = ThetaView {
                gamma_h0: gh0_new.as_slice(),
                ..state.params.view()
            };
            let mut delta_surv = 0.0;
            let mut cand_surv = vec![0.0; n];
            for (i, d) in designs.iter().enumerate() {
                cand_surv[i] = subject_surv(frame, d, &theta_new, state.b[i].as_slice());
                delta_surv += cand_surv[i] - state.subj_ll[i].surv;
            }
            let dprior = log_prior_gamma_h0(frame, gh0_new.as_slice(), state.params.tau, priors)
                - log_prior_gamma_h0(
                    frame,
                    state.params.gamma_h0.as_slice(),
                    state.params.tau,
                    priors,
                );
            let la = finite_or_reject(delta_surv + dprior);
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let accept = u.ln() < la;
            if accept {
                state.params.gamma_h0 = gh0_new;
                for (l, sv) in state.subj_ll.iter_mut().zip(&cand_surv) {
                    l.surv = *sv;
                }
            }
            sc_gh0.record(accept, adapting);
        }

        // -- (γ, α) block ---------------------------------------------------
        if n_ga > 0 {
            let s = sc_ga.scale();
            let k_g = frame.n_gamma();
            let gamma_new = DVector::from_iterator(
                k_g,
                state.params.gamma.iter().map(|&g| {
                    let z: f64 = rng.sample(StandardNormal);
                    g + s * z
                }),
            );
            let alpha_new = DVector::from_iterator(
                frame.n_alpha(),
                state.params.alpha.iter().map(|&a| {
                    let z: f64 = rng.sample(StandardNormal);
                    a + s * z
                }),
            );
            let theta_new = ThetaView {
                gamma: gamma_new.as_slice(),
                alpha: alpha_new.as_slice(),
                ..state.params.view()
            };
            let mut delta_surv = 0.0;
            let mut cand_surv = vec![0.0; n];
            for (i, d) in designs.iter().enumerate() {
                cand_surv[i] = subject_surv(frame, d, &theta_new, state.b[i].as_slice());
                delta_surv += cand_surv[i] - state.subj_ll[i].surv;
            }
            let dprior = normal_kernel_sum(gamma_new.as_slice(), priors.gamma_sd)
                + normal_kernel_sum(alpha_new.as_slice(), priors.alpha_sd)
                - normal_kernel_sum(state.params.gamma.as_slice(), priors.gamma_sd)
                - normal_kernel_sum(state.params.alpha.as_slice(), priors.alpha_sd);
            let la = finite_or_reject(delta_surv + dprior);
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let accept = u.ln() < la;
            if accept {
                state.params.gamma = gamma_new;
                state.params.alpha = alpha_new;
                for (l, sv) in state.subj_ll.iter_mut().zip(&cand_surv) {
                    l.surv = *sv;
                }
            }
            sc_ga.record(accept, adapting);
        }

        // -- b_i blocks -------------------------------------------------------
        {
            let theta = state.params.view();
            for i in 0..n {
                let s = sc_b[i].scale();
                let b_new = DVector::from_iterator(
                    q,
                    state.b[i].iter().map(|&v| {
                        let z: f64 = rng.sample(StandardNormal);
                        v + s * z
                    }),
                );
                let cand = subject_loglik(frame, &designs[i], &theta, b_new.as_slice());
                let bp_new = state.d_factor.logpdf(&b_new, &zero_mean);
                let la = finite_or_reject(
                    cand.total() - state.subj_ll[i].total() + bp_new - state.b_prior[i],
                );
                let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let accept = u.ln() < la;
                if accept {
                    state.b[i] = b_new;
                    state.subj_ll[i] = cand;
                    state.b_prior[i] = bp_new;
                }
                sc_b[i].record(accept, adapting);
            }
        }

        // -- D block ----------------------------------------------------------
        if config.fix_d.is_none() {
            let s = sc_d.scale();
            let d_new = DParam {
                log_radii: state
                    .params
                    .d
                    .log_radii
                    .iter()
                    .map(|&v| {
                        let z: f64 = rng.sample(StandardNormal);
                        v + s * z
                    })
                    .collect(),
                angles: state
                    .params
                    .d
                    .angles
                    .iter()
                    .map(|&v| {
                        let z: f64 = rng.sample(StandardNormal);
                        reflect_angle(v + s * z)
                    })
                    .collect(),
            };
            let accept = match MvnFactor::new(&d_new.cov()) {
                Err(_) => false,
                Ok(factor_new) => {
                    let bp_new: Vec<f64> = state
                        .b
                        .iter()
                        .map(|bi| factor_new.logpdf(bi, &zero_mean))
                        .collect();
                    let delta: f64 = bp_new
                        .iter()
                        .zip(&state.b_prior)
                        .map(|(new, old)| new - old)
                        .sum::<f64>()
                        + d_new.log_prior(priors)
                        - state.params.d.log_prior(priors);
                    let la = finite_or_reject(delta);
                    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                    let accept = u.ln() < la;
                    if accept {
                        state.params.d = d_new;
                        state.d_factor = factor_new;
                        state.b_prior = bp_new;
                    }
                    accept
                }
            };
            sc_d.record(accept, adapting);
        }

        // -- τ Gibbs -----------------------------------------------------------
        {
            let quad = frame.penalty.quad_form(state.params.gamma_h0.as_slice());
            state.params.tau = gibbs_tau(priors, frame.penalty.rank, quad, &mut rng);
        }

        // -- storage -----------------------------------------------------------
        if it >= config.burn_in && (it - config.burn_in) % config.thin == 0 {
            thetas.push(state.params.to_draw());
            if let Some(re) = &mut random_effects {
                let mut flat = Vec::with_capacity(n * q);
                for bi in &state.b {
                    flat.extend(bi.iter());
                }
                re.push(flat);
            }
        }
    }

    let mut acceptance = vec![("beta".to_string(), sc_beta.post_rate())];
    if config.fix_sigma.is_none() {
        acceptance.push(("log_sigma".to_string(), sc_sigma.post_rate()));
    }
    acceptance.push(("gamma_h0".to_string(), sc_gh0.post_rate()));
    if n_ga > 0 {
        acceptance.push(("gamma_alpha".to_string(), sc_ga.post_rate()));
    }
    let b_rate = sc_b.iter().map(|a| a.post_rate()).sum::<f64>() / n.max(1) as f64;
    acceptance.push(("random_effects".to_string(), b_rate));
    if config.fix_d.is_none() {
        acceptance.push(("d".to_string(), sc_d.post_rate()));
    }

    let draws = PosteriorDraws {
        thetas,
        random_effects,
        acceptance,
        meta: ChainMeta {
            model_name: frame.spec.name.clone(),
            seed: config.seed,
            iterations: config.iterations,
            burn_in: config.burn_in,
            thin: config.thin,
            n_subjects: n,
            resolved: frame.resolved.clone(),
        },
    };
    draws.validate()?;
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SubjectRecord;
    use crate::jointmodel::spec::{BaselineConfig, FunctionalForm, TrajectoryBasis};
    use approx::assert_abs_diff_eq;
    use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

    fn two_subject_data() -> Dataset {
        let s1 = SubjectRecord {
            id: "a".into(),
            covariates: vec![],
            times: vec![0.0, 1.0, 2.0],
            values: vec![1.9, 1.6, 1.5],
            obs_time: 5.0,
            event: false,
        };
        let s2 = SubjectRecord {
            id: "b".into(),
            covariates: vec![],
            times: vec![0.0, 1.0, 3.0],
            values: vec![2.4, 2.2, 1.7],
            obs_time: 6.0,
            event: true,
        };
        Dataset::new(vec![s1, s2], vec![]).unwrap()
    }

    fn null_spec() -> JointModelSpec {
        JointModelSpec {
            name: "null".into(),
            trajectory: TrajectoryBasis::Linear,
            long_covariates: vec![],
            forms: vec![],
            hazard_covariates: vec![],
            baseline: BaselineConfig {
                degree: 2,
                interior_knots: 1,
                penalty_order: 1,
            },
        }
    }

    #[test]
    fn tau_gibbs_matches_analytic_gamma() {
        // 10⁵ draws vs the analytic conditional CDF; KS < 0.01.
        let priors = PriorSpec::default();
        let rank = 7usize;
        let quad = 3.4f64;
        let mut rng = crate::streams::stream(21, &[1]);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| gibbs_tau(&priors, rank, quad, &mut rng))
            .collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let shape = 5.0 + 0.5 * rank as f64;
        let rate = 0.05 + 0.5 * quad;
        let dist = GammaDist::new(shape, rate).unwrap();
        let mut ks = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            let cdf = dist.cdf(x);
            ks = ks.max((emp_hi - cdf).abs()).max((cdf - emp_lo).abs());
        }
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn same_seed_bit_identical_draws() {
        let data = two_subject_data();
        let spec = null_spec();
        let config = McmcConfig {
            iterations: 120,
            burn_in: 60,
            thin: 2,
            seed: 9,
            ..McmcConfig::default()
        };
        let a = fit_mcmc(&spec, &PriorSpec::default(), &data, &config).unwrap();
        let b = fit_mcmc(&spec, &PriorSpec::default(), &data, &config).unwrap();
        assert_eq!(a.thetas, b.thetas);
        assert_eq!(a.random_effects, b.random_effects);
        assert_eq!(a.acceptance, b.acceptance);
        let c = fit_mcmc(
            &spec,
            &PriorSpec::default(),
            &data,
            &McmcConfig {
                seed: 10,
                ..config
            },
        )
        .unwrap();
        assert_ne!(a.thetas, c.thetas);
    }

    #[test]
    fn stored_draws_satisfy_invariants_and_counts() {
        let data = two_subject_data();
        let spec = null_spec();
        let config = McmcConfig {
            iterations: 100,
            burn_in: 40,
            thin: 3,
            seed: 4,
            ..McmcConfig::default()
        };
        let fit = fit_mcmc(&spec, &PriorSpec::default(), &data, &config).unwrap();
        assert_eq!(fit.len(), config.n_draws());
        fit.validate().unwrap();
        let re = fit.random_effects.as_ref().unwrap();
        assert_eq!(re[0].len(), 2 * 2);
        for t in &fit.thetas {
            assert!(t.sigma > 0.0 && t.tau > 0.0);
        }
    }

    #[test]
    fn config_validation() {
        let bad = McmcConfig {
            iterations: 10,
            burn_in: 10,
            ..McmcConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = McmcConfig {
            thin: 0,
            ..McmcConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn conjugate_oracle_two_subject_toy() {
        // α absent (no forms), σ and D fixed: the (β, b) posterior is the
        // Gaussian linear mixed model posterior. Marginally,
        // y_i ~ N(X_i β, Z_i D Z_iᵀ + σ² I), β prior N(0, s²I):
        // posterior precision A = Σ X_iᵀ V_i⁻¹ X_i + I/s², mean A⁻¹ Σ XᵀV⁻¹y.
        let data = two_subject_data();
        let spec = null_spec();
        let sigma = 0.3;
        let d_fixed = vec![0.5, -0.02, -0.02, 0.05];
        let config = McmcConfig {
            iterations: 60_000,
            burn_in: 10_000,
            thin: 10,
            seed: 31,
            fix_sigma: Some(sigma),
            fix_d: Some(d_fixed.clone()),
            store_random_effects: false,
        };
        let fit = fit_mcmc(&spec, &PriorSpec::default(), &data, &config).unwrap();

        // Closed form.
        let d = DMatrix::from_row_slice(2, 2, &d_fixed);
        let sd_prior = PriorSpec::default().beta_sd;
        let mut prec = DMatrix::identity(2, 2) / (sd_prior * sd_prior);
        let mut rhs = DVector::zeros(2);
        for rec in &data.subjects {
            let ni = rec.times.len();
            let x = DMatrix::from_fn(ni, 2, |r, c| if c == 0 { 1.0 } else { rec.times[r] });
            let v = &x * &d * x.transpose() + DMatrix::identity(ni, ni) * sigma * sigma;
            let vinv = v.try_inverse().unwrap();
            let y = DVector::from_vec(rec.values.clone());
            prec += x.transpose() * &vinv * &x;
            rhs += x.transpose() * &vinv * y;
        }
        let mean = prec.try_inverse().unwrap() * rhs;

        // Posterior mean from the chain with batch-means MC error.
        for coord in 0..2 {
            let xs: Vec<f64> = fit.thetas.iter().map(|t| t.beta[coord]).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let n_batches = 20;
            let bs = xs.len() / n_batches;
            let means: Vec<f64> = (0..n_batches)
                .map(|k| xs[k * bs..(k + 1) * bs].iter().sum::<f64>() / bs as f64)
                .collect();
            let bm = means.iter().sum::<f64>() / n_batches as f64;
            let var =
                means.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
            let se = (var / n_batches as f64).sqrt();
            assert!(
                (m - mean[coord]).abs() < 3.0 * se.max(1e-4),
                "β[{coord}]: chain {m} vs closed form {} (se {se})",
                mean[coord]
            );
        }
    }

    #[test]
    fn acceptance_rates_land_near_target_after_adaptation() {
        // A small but real fit: adapted blocks should sit in a sane band.
        let mut rng = crate::streams::stream(77, &[2]);
        use rand::Rng;
        let subjects: Vec<SubjectRecord> = (0..40)
            .map(|i| {
                let b0: f64 = rng.gen_range(-0.5..0.5);
                let obs: f64 = rng.gen_range(2.0..10.0);
                let times: Vec<f64> = (0..8)
                    .map(f64::from)
                    .filter(|t| *t < obs)
                    .collect();
                let values: Vec<f64> = times
                    .iter()
                    .map(|t| 1.5 + b0 - 0.2 * t + 0.1 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                SubjectRecord {
                    id: format!("s{i}"),
                    covariates: vec![],
                    times,
                    values,
                    obs_time: obs,
                    event: i % 2 == 0,
                }
            })
            .collect();
        let data = Dataset::new(subjects, vec![]).unwrap();
        let spec = JointModelSpec {
            name: "value".into(),
            trajectory: TrajectoryBasis::Linear,
            long_covariates: vec![],
            forms: vec![FunctionalForm::Value],
            hazard_covariates: vec![],
            baseline: BaselineConfig {
                degree: 3,
                interior_knots: 2,
                penalty_order: 2,
            },
        };
        let config = McmcConfig {
            iterations: 3000,
            burn_in: 1500,
            thin: 3,
            seed: 5,
            ..McmcConfig::default()
        };
        let fit = fit_mcmc(&spec, &PriorSpec::default(), &data, &config).unwrap();
        for (name, rate) in &fit.acceptance {
            assert!(
                (0.05..=0.65).contains(rate),
                "block {name} acceptance {rate} outside sane band"
            );
        }
    }

    #[test]
    fn extension_invariant_holds_through_public_api() {
        // Sanity on ThetaDraw validation path.
        let data = two_subject_data();
        let spec = null_spec();
        let config = McmcConfig {
            iterations: 40,
            burn_in: 20,
            thin: 1,
            seed: 1,
            ..McmcConfig::default()
        };
        let fit = fit_mcmc(&spec, &PriorSpec::default(), &data, &config).unwrap();
        assert_eq!(fit.meta.n_subjects, 2);
        assert_eq!(fit.meta.model_name, "null");
        assert!(fit.meta.resolved.follow_up_range >= 6.0);
        let d0 = fit.thetas[0].d_matrix();
        assert_abs_diff_eq!(d0[(0, 1)], d0[(1, 0)], epsilon = 1e-12);
    }
}
