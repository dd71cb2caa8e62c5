//! Monte Carlo dynamic risk prediction from a fitted joint model.
//!
//! Given posterior draws θ^(m) and a subject's longitudinal history up to a
//! landmark t, the conditional risk of an event in (t, u] is
//!
//!   π(u|t) = 1 − E[ S(u|b,θ) / S(t|b,θ) | history, T > t ]
//!
//! estimated by averaging exp(−Λ(t,u | b^(m), θ^(m))) over M Monte Carlo
//! draws, where each b^(m) is a Metropolis–Hastings draw from
//! p(b | y-history, T > t, θ^(m)) refreshed from the previous retained state.
//!
//! The same machinery serves re-anchored predictions (conditioning on
//! survival past an anchor a ≥ t while the measurement history stays cut at
//! t), which the scoring plans below require for model-based Brier scores
//! and EPCE hazard brackets.

use crate::data::{interval_outcome, SubjectRecord};
use crate::error::{Error, Result};
use crate::jointmodel::{
    subject_loglik, ModelFrame, PosteriorDraws, SubjectDesign, ThetaDraw, ThetaView,
};
use crate::numerics::MvnFactor;
use crate::scoring::{DiffScheme, Metric};
use serde::{Deserialize, Serialize};
use crate::streams::{self, tags};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Default number of Monte Carlo draws per prediction.
pub const DEFAULT_MC_DRAWS: usize = 200;

/// Inner Metropolis–Hastings steps per retained random-effects draw.
const INNER_STEPS: usize = 25;
/// Steps for the first retained draw, during which the proposal scale adapts.
const WARMUP_STEPS: usize = 250;
/// Adaptation batch size during warm-up.
const WARMUP_BATCH: usize = 25;
const TARGET_RATE: f64 = 0.234;

/// A dynamic-prediction request at one landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRequest {
    /// Landmark time t; only measurements at or before t are used and the
    /// subject must still be at risk.
    pub landmark: f64,
    /// Horizons u ≥ t at which π(u|t) is evaluated (any order; duplicates
    /// allowed). Results align with this order.
    pub targets: Vec<f64>,
    /// Monte Carlo draws M.
    pub mc_draws: usize,
    pub seed: u64,
}

/// Per-horizon risks with Monte Carlo uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    /// Landmark t (measurement cutoff).
    pub landmark: f64,
    /// Survival-conditioning anchor a ≥ t (equals `landmark` unless
    /// re-anchored).
    pub anchor: f64,
    pub targets: Vec<f64>,
    /// π(u|a) per target, in request order.
    pub risk: Vec<f64>,
    /// 1 − risk.
    pub survival: Vec<f64>,
    /// Monte Carlo standard error: sample sd of the survival ratios / √M.
    pub mc_se: Vec<f64>,
}

/// Options for the low-level prediction engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RiskConfig {
    pub mc_draws: usize,
    pub seed: u64,
    /// Index of the model within a library run; part of the stream key so
    /// different models draw independent randomness.
    pub model_index: u64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            mc_draws: DEFAULT_MC_DRAWS,
            seed: 0,
            model_index: 0,
        }
    }
}

/// The random stream for one (subject, anchor, model) prediction task.
/// Keying on the subject identifier (not its row position) makes predictions
/// invariant to dataset ordering.
pub fn prediction_stream(seed: u64, subject_id: &str, anchor: f64, model_index: u64) -> ChaCha12Rng {
    streams::stream(
        seed,
        &[
            tags::PREDICT,
            streams::fnv1a64(subject_id.as_bytes()),
            anchor.to_bits(),
            model_index,
        ],
    )
}

/// Random-walk Metropolis–Hastings sampler for
/// p(b | y-history ≤ cutoff, T > anchor, θ) ∝
///   Π_l N(y_l; η(t_l), σ) · exp(−Λ(0, anchor)) · N(b; 0, D).
///
/// The sampler keeps its state (current b, proposal scale) across calls so
/// successive θ-draws warm-start from the previous retained b. The first
/// retained draw runs a longer adaptive warm-up; the scale is frozen
/// afterwards so the chain is a fixed-kernel sampler from then on.
pub struct ConditionalSampler<'a> {
    frame: &'a ModelFrame,
    design: SubjectDesign,
    subject_id: String,
    b: DVector<f64>,
    log_s: f64,
    warmed: bool,
}

impl<'a> ConditionalSampler<'a> {
    /// Masks the record's measurements to those at or before
    /// `history_cutoff` and conditions survival to `anchor` ≥ cutoff.
    pub fn new(
        frame: &'a ModelFrame,
        record: &SubjectRecord,
        history_cutoff: f64,
        anchor: f64,
    ) -> Result<Self> {
        if !record.at_risk(history_cutoff) {
            return Err(Error::invalid(format!(
                "subject {} is not at risk at the landmark t={history_cutoff} \
                 (observed time {})",
                record.id, record.obs_time
            )));
        }
        if !(anchor >= history_cutoff) {
            return Err(Error::invalid(format!(
                "prediction anchor {anchor} precedes the landmark {history_cutoff}"
            )));
        }
        let hist = record.history_len(history_cutoff);
        if hist == 0 {
            return Err(Error::invalid(format!(
                "subject {} has no measurements at or before t={history_cutoff}",
                record.id
            )));
        }
        let masked = SubjectRecord {
            id: record.id.clone(),
            covariates: record.covariates.clone(),
            times: record.times[..hist].to_vec(),
            values: record.values[..hist].to_vec(),
            obs_time: anchor,
            event: false,
        };
        let design = frame.subject_design(&masked)?;
        Ok(Self {
            frame,
            design,
            subject_id: record.id.clone(),
            b: DVector::zeros(frame.q()),
            log_s: (0.3f64).ln(),
            warmed: false,
        })
    }

    /// Hazard-covariate values of the masked design.
    pub fn w_haz(&self) -> &[f64] {
        &self.design.w_haz
    }

    /// Current retained random-effects state.
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    fn log_target(&self, theta: &ThetaView, d_factor: &MvnFactor, b: &DVector<f64>) -> f64 {
        let zero = DVector::zeros(b.len());
        subject_loglik(self.frame, &self.design, theta, b.as_slice()).total()
            + d_factor.logpdf(b, &zero)
    }

    /// Advances the chain under θ-draw `draw_index` and retains one draw.
    pub fn refresh(
        &mut self,
        theta: &ThetaView,
        d_factor: &MvnFactor,
        draw_index: usize,
        rng: &mut impl Rng,
    ) -> Result<()> {
        let mut cur = self.log_target(theta, d_factor, &self.b);
        if !cur.is_finite() {
            // A θ update can invalidate the warm state; restart at the prior
            // mode before declaring the draw unusable.
            self.b.fill(0.0);
            cur = self.log_target(theta, d_factor, &self.b);
            if !cur.is_finite() {
                return Err(Error::numerical(format!(
                    "conditional random-effects target is non-finite at b = 0 \
                     for θ-draw {draw_index} (subject {})",
                    self.subject_id
                )));
            }
        }
        let warmup = !self.warmed;
        let steps = if warmup { WARMUP_STEPS } else { INNER_STEPS };
        let mut accepted = 0usize;
        let mut batch = 0usize;
        for step in 0..steps {
            let scale = self.log_s.exp();
            let mut cand = self.b.clone();
            for x in cand.iter_mut() {
                *x += scale * rng.sample::<f64, _>(StandardNormal);
            }
            let cand_lt = self.log_target(theta, d_factor, &cand);
            let la = if cand_lt.is_finite() {
                cand_lt - cur
            } else {
                f64::NEG_INFINITY
            };
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            if u.ln() < la {
                self.b = cand;
                cur = cand_lt;
                accepted += 1;
            }
            if warmup && (step + 1) % WARMUP_BATCH == 0 {
                batch += 1;
                let rate = accepted as f64 / WARMUP_BATCH as f64;
                self.log_s =
                    (self.log_s + (rate - TARGET_RATE) / (batch as f64).sqrt()).clamp(-10.0, 4.0);
                accepted = 0;
            }
        }
        self.warmed = true;
        Ok(())
    }
}

/// One Metropolis–Hastings draw of b_i given a θ-draw and the subject's
/// history up to t (fresh sampler: adaptive warm-up then one retained draw).
pub fn conditional_random_effects(
    frame: &ModelFrame,
    theta: &ThetaDraw,
    record: &SubjectRecord,
    t: f64,
    rng: &mut impl Rng,
) -> Result<DVector<f64>> {
    let mut sampler = ConditionalSampler::new(frame, record, t, t)?;
    let d_factor = MvnFactor::new(&theta.d_matrix())
        .map_err(|e| Error::numerical(format!("θ-draw 0: covariance not usable: {e}")))?;
    sampler.refresh(&theta.view(), &d_factor, 0, rng)?;
    Ok(sampler.b().clone())
}

/// Conditional risks π(u|anchor) for one subject, with the measurement
/// history cut at `history_cutoff` ≤ anchor. Targets may come in any order;
/// internally they are sorted so each draw's cumulative hazard accumulates
/// over successive segments, which makes per-draw survival ratios exactly
/// non-increasing in u (and π(anchor|anchor) exactly 0).
pub fn conditional_risks(
    frame: &ModelFrame,
    fit: &PosteriorDraws,
    record: &SubjectRecord,
    history_cutoff: f64,
    anchor: f64,
    targets: &[f64],
    cfg: &RiskConfig,
) -> Result<PredictionResult> {
    if fit.thetas.is_empty() {
        return Err(Error::invalid("posterior fit holds no stored draws"));
    }
    if cfg.mc_draws == 0 {
        return Err(Error::invalid("mc_draws must be at least 1"));
    }
    for &u in targets {
        if !u.is_finite() || u < anchor {
            return Err(Error::invalid(format!(
                "prediction horizon {u} is not at or after the anchor {anchor}"
            )));
        }
    }
    let mut sampler = ConditionalSampler::new(frame, record, history_cutoff, anchor)?;

    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&i, &j| targets[i].total_cmp(&targets[j]));
    let mut segments = Vec::with_capacity(order.len());
    let mut prev = anchor;
    for &j in &order {
        let u = targets[j];
        let pts = if u > prev {
            frame.interval_points(&record.covariates, prev, u)?
        } else {
            Vec::new()
        };
        segments.push(pts);
        prev = prev.max(u);
    }

    let mut rng = prediction_stream(cfg.seed, &record.id, anchor, cfg.model_index);
    let m_total = cfg.mc_draws;
    let k_count = fit.thetas.len();
    let mut ratios = vec![vec![0.0f64; m_total]; order.len()];
    let mut cached: Option<(usize, MvnFactor)> = None;
    for m in 0..m_total {
        // Deterministic stride over the stored draws: uses every draw when
        // M ≥ K and an evenly spaced subsample otherwise.
        let k = (m * k_count) / m_total;
        if cached.as_ref().is_none_or(|(ck, _)| *ck != k) {
            let f = MvnFactor::new(&fit.thetas[k].d_matrix()).map_err(|e| {
                Error::numerical(format!("θ-draw {k}: covariance not usable: {e}"))
            })?;
            cached = Some((k, f));
        }
        let theta = fit.thetas[k].view();
        let d_factor = &cached.as_ref().unwrap().1;
        sampler.refresh(&theta, d_factor, k, &mut rng)?;
        let b = sampler.b().as_slice().to_vec();
        let mut lam = 0.0;
        for (jj, seg) in segments.iter().enumerate() {
            lam += crate::jointmodel::cumulative_hazard_points(
                frame,
                &theta,
                &b,
                sampler.w_haz(),
                seg,
            );
            ratios[jj][m] = (-lam).exp();
        }
    }

    let n = targets.len();
    let (mut risk, mut survival, mut mc_se) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (jj, &j) in order.iter().enumerate() {
        let r = &ratios[jj];
        let mean = r.iter().sum::<f64>() / m_total as f64;
        let var = if m_total > 1 {
            r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m_total - 1) as f64
        } else {
            0.0
        };
        survival[j] = mean;
        risk[j] = 1.0 - mean;
        mc_se[j] = (var / m_total as f64).sqrt();
    }
    Ok(PredictionResult {
        landmark: history_cutoff,
        anchor,
        targets: targets.to_vec(),
        risk,
        survival,
        mc_se,
    })
}

/// Dynamic risk prediction at a landmark: anchor = landmark.
pub fn dynamic_risk(
    frame: &ModelFrame,
    fit: &PosteriorDraws,
    record: &SubjectRecord,
    request: &PredictionRequest,
) -> Result<PredictionResult> {
    conditional_risks(
        frame,
        fit,
        record,
        request.landmark,
        request.landmark,
        &request.targets,
        &RiskConfig {
            mc_draws: request.mc_draws,
            seed: request.seed,
            model_index: 0,
        },
    )
}

/// What a conditional probability in an evaluation plan is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointRole {
    /// π(t+dt/2 | t) — Brier score at the window midpoint.
    IbsMid,
    /// π(t+dt | t) — Brier score at the window end.
    IbsEnd,
    /// π(t+dt | T_i) — re-anchored mixture weight for a subject censored
    /// inside the window (model-based Brier only).
    Reanchor,
    /// π(t+dt/2 | T_i) — re-anchored mixture weight at the window midpoint
    /// for a subject censored in (t, t+dt/2] (model-based Brier only).
    ReanchorMid,
    /// π-survival(T̃ | t) — the EPCE log-survival term.
    EpceAnchor,
    /// π-survival(T̃+ε | T̃) — forward hazard-bracket numerator.
    EpceForward,
    /// π-survival(T̃ | T̃−ε) — left factor of the central hazard bracket.
    EpceCentralLeft,
}

/// One conditional probability the scorer will need: π(target | anchor) for
/// this subject, with the measurement history always cut at the landmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub anchor: f64,
    pub target: f64,
    pub role: PointRole,
}

/// The evaluation-point plan for one at-risk subject at window (t, t+dt].
///
/// - IBS (both flavors): π at t+dt/2 and t+dt anchored at t; the
///   model-based flavor adds the re-anchored pair (T_i, t+dt) for subjects
///   censored inside the window, plus (T_i, t+dt/2) when the censoring
///   falls inside the midpoint window (t, t+dt/2] — the midpoint Brier
///   score needs its own mixture weight there.
/// - EPCE: the survival term (t, T̃); events add the forward pair
///   (T̃, T̃+ε), and under the central scheme also (T̃−ε, T̃) whenever
///   T̃−ε ≥ t (otherwise that subject falls back to the forward bracket).
pub fn required_evaluations(
    metric: Metric,
    t: f64,
    dt: f64,
    record: &SubjectRecord,
    eps: f64,
    scheme: DiffScheme,
) -> Result<Vec<EvalPair>> {
    let (t_tilde, delta_tilde) = interval_outcome(record, t, dt)?;
    let end = t + dt;
    let mut plan = Vec::with_capacity(3);
    match metric {
        Metric::IbsIpcw | Metric::IbsModel => {
            plan.push(EvalPair {
                anchor: t,
                target: t + dt / 2.0,
                role: PointRole::IbsMid,
            });
            plan.push(EvalPair {
                anchor: t,
                target: end,
                role: PointRole::IbsEnd,
            });
            if metric == Metric::IbsModel && !record.event && record.obs_time <= end {
                if record.obs_time <= t + dt / 2.0 {
                    plan.push(EvalPair {
                        anchor: record.obs_time,
                        target: t + dt / 2.0,
                        role: PointRole::ReanchorMid,
                    });
                }
                plan.push(EvalPair {
                    anchor: record.obs_time,
                    target: end,
                    role: PointRole::Reanchor,
                });
            }
        }
        Metric::Epce => {
            if !(eps > 0.0) {
                return Err(Error::invalid(format!("ε must be positive, got {eps}")));
            }
            plan.push(EvalPair {
                anchor: t,
                target: t_tilde,
                role: PointRole::EpceAnchor,
            });
            if delta_tilde {
                if scheme == DiffScheme::Central && t_tilde - eps >= t {
                    plan.push(EvalPair {
                        anchor: t_tilde - eps,
                        target: t_tilde,
                        role: PointRole::EpceCentralLeft,
                    });
                }
                plan.push(EvalPair {
                    anchor: t_tilde,
                    target: t_tilde + eps,
                    role: PointRole::EpceForward,
                });
            }
        }
    }
    Ok(plan)
}
