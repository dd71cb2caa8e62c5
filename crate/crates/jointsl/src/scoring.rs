//! Proper scoring rules on dynamic predictions: Brier score with IPCW or
//! model-based censoring handling, integrated Brier score (Simpson), and
//! expected predictive cross-entropy (EPCE).
//!
//! All operations are pure functions of their inputs. Probabilities are
//! clamped to [1e-12, 1−1e-12] only inside logarithms; an exact zero where a
//! logarithm is required yields an infinite-score sentinel with per-subject
//! diagnostics rather than a silent clip.

use crate::data::Dataset;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Scoring metric; the Brier family is split by its censoring handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Integrated Brier score with inverse-probability-of-censoring weights.
    IbsIpcw,
    /// Integrated Brier score with model-based censoring handling.
    IbsModel,
    /// Expected predictive cross-entropy.
    Epce,
}

impl Metric {
    pub fn label(&self) -> &'static str {
        match self {
            Metric::IbsIpcw => "ibs-ipcw",
            Metric::IbsModel => "ibs-model",
            Metric::Epce => "epce",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Finite-difference scheme for the EPCE hazard approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffScheme {
    Forward,
    Central,
}

/// Default ε for the EPCE hazard finite difference.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Clamp applied to probabilities strictly inside logarithms.
const LOG_CLAMP: f64 = 1e-12;

fn ln_clamped(p: f64) -> f64 {
    p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP).ln()
}

/// Reverse Kaplan–Meier censoring-survival curve Ĝ(s|t), anchored at `t`:
/// the product-limit estimator computed on {i : T_i > t} with censoring
/// (δ=0) treated as the event. Right-continuous, Ĝ(t|t) = 1, non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringCurve {
    pub anchor: f64,
    /// Jump times, strictly increasing, all > anchor.
    times: Vec<f64>,
    /// Curve value immediately after the corresponding jump.
    values: Vec<f64>,
}

impl CensoringCurve {
    /// Right-continuous evaluation Ĝ(s|t).
    pub fn eval(&self, s: f64) -> f64 {
        // Value after the last jump at a time ≤ s.
        let k = self.times.partition_point(|&x| x <= s);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// Left-limit evaluation Ĝ(s−|t), used at observed event times so a
    /// subject's own jump never enters its weight.
    pub fn eval_left(&self, s: f64) -> f64 {
        let k = self.times.partition_point(|&x| x < s);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }
}

/// Reverse Kaplan–Meier on the risk set at `t`.
pub fn reverse_km(data: &Dataset, t: f64) -> Result<CensoringCurve> {
    let mut obs: Vec<(f64, bool)> = data
        .subjects
        .iter()
        .filter(|s| s.at_risk(t))
        .map(|s| (s.obs_time, s.event))
        .collect();
    if obs.is_empty() {
        return Err(Error::invalid(format!(
            "reverse Kaplan–Meier needs a non-empty risk set at t={t}"
        )));
    }
    obs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n = obs.len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut g = 1.0;
    let mut i = 0;
    while i < n {
        let s = obs[i].0;
        let at_risk = n - i; // #{T_j ≥ s} within the anchored risk set
        let mut d_cens = 0usize;
        let mut j = i;
        while j < n && obs[j].0 == s {
            if !obs[j].1 {
                d_cens += 1;
            }
            j += 1;
        }
        if d_cens > 0 {
            g *= 1.0 - d_cens as f64 / at_risk as f64;
            times.push(s);
            values.push(g);
        }
        i = j;
    }
    Ok(CensoringCurve {
        anchor: t,
        times,
        values,
    })
}

/// One subject's inputs to the Brier-score estimators at window (t, t+dt].
#[derive(Debug, Clone, PartialEq)]
pub struct BrierInput {
    pub id: String,
    /// Raw (untruncated) observed time and event indicator.
    pub obs_time: f64,
    pub event: bool,
    /// Combined predicted risk π̃(t+dt | t).
    pub risk: f64,
    /// Re-anchored risk π̃(t+dt | T_i); required by the model-based
    /// estimator for subjects censored inside the window.
    pub reanchored_risk: Option<f64>,
}

fn check_at_risk(items: &[BrierInput], t: f64) -> Result<()> {
    if items.is_empty() {
        return Err(Error::invalid(format!("no subjects at risk at t={t}")));
    }
    for it in items {
        if it.obs_time <= t {
            return Err(Error::invalid(format!(
                "subject {} is not at risk at t={t} (observed time {})",
                it.id, it.obs_time
            )));
        }
    }
    Ok(())
}

/// IPCW Brier score at (t, t+dt]:
/// (1/n_t) Σ Ŵ_i {1(T_i ≤ t+dt) − π̃_i}² with
/// Ŵ_i = 1(t < T_i ≤ t+dt) δ_i / Ĝ(T_i−|t) + 1(T_i > t+dt) / Ĝ(t+dt|t);
/// subjects censored inside the window get weight zero.
pub fn brier_ipcw(items: &[BrierInput], curve: &CensoringCurve, t: f64, dt: f64) -> Result<f64> {
    check_at_risk(items, t)?;
    if !(dt > 0.0) {
        return Err(Error::invalid("window width must be positive"));
    }
    let end = t + dt;
    let mut acc = 0.0;
    for it in items {
        if it.obs_time <= end {
            if it.event {
                let g = curve.eval_left(it.obs_time);
                if g <= 0.0 {
                    return Err(Error::numerical(format!(
                        "IPCW weight undefined for subject {}: Ĝ({}−|{t}) = 0",
                        it.id, it.obs_time
                    )));
                }
                acc += (1.0 - it.risk) * (1.0 - it.risk) / g;
            }
            // censored in-window: weight 0
        } else {
            let g = curve.eval(end);
            if g <= 0.0 {
                return Err(Error::numerical(format!(
                    "IPCW weight undefined for subject {}: Ĝ({end}|{t}) = 0",
                    it.id
                )));
            }
            acc += it.risk * it.risk / g;
        }
    }
    Ok(acc / items.len() as f64)
}

/// Model-based Brier score at (t, t+dt]: events contribute {1−π̃}², window
/// survivors contribute π̃², and subjects censored in-window contribute the
/// model-predicted mixture π̃(t+dt|T_i)·{1−π̃}² + {1−π̃(t+dt|T_i)}·π̃².
pub fn brier_model_based(items: &[BrierInput], t: f64, dt: f64) -> Result<f64> {
    check_at_risk(items, t)?;
    if !(dt > 0.0) {
        return Err(Error::invalid("window width must be positive"));
    }
    let end = t + dt;
    let mut acc = 0.0;
    for it in items {
        let sq_event = (1.0 - it.risk) * (1.0 - it.risk);
        let sq_surv = it.risk * it.risk;
        if it.obs_time <= end {
            if it.event {
                acc += sq_event;
            } else {
                let chi = it.reanchored_risk.ok_or_else(|| {
                    Error::invalid(format!(
                        "subject {} is censored inside ({t}, {end}] but its \
                         re-anchored prediction π̃(t+dt|T_i) is missing from the plan",
                        it.id
                    ))
                })?;
                acc += chi * sq_event + (1.0 - chi) * sq_surv;
            }
        } else {
            acc += sq_surv;
        }
    }
    Ok(acc / items.len() as f64)
}

/// Integrated Brier score over (t, t+dt] by Simpson's rule with BS(t,t) = 0:
/// (2/3)·BS(t+dt/2) + (1/6)·BS(t+dt). The window width cancels after
/// normalizing by dt, so it does not enter the formula.
pub fn ibs(bs_mid: f64, bs_end: f64, _dt: f64) -> f64 {
    (2.0 / 3.0) * bs_mid + (1.0 / 6.0) * bs_end
}

/// One subject's inputs to the EPCE estimator at window (t, t+dt].
///
/// All probabilities are *survival* probabilities: `surv_anchor` is
/// π-survival(T̃|t); `surv_fwd` is π-survival(T̃+ε | T̃) (events only);
/// `surv_central_left` is π-survival(T̃ | T̃−ε) (events under the central
/// scheme only), whose reciprocal is the backward ratio S(T̃−ε|T̃) ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EpceInput {
    pub id: String,
    /// Window-truncated outcome from `interval_outcome`.
    pub t_tilde: f64,
    pub delta_tilde: bool,
    pub surv_anchor: f64,
    pub surv_fwd: Option<f64>,
    pub surv_central_left: Option<f64>,
}

/// A subject whose EPCE contribution is infinite, with the offending term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpceOffender {
    pub id: String,
    pub reason: String,
}

/// EPCE value plus diagnostics; `value` is +∞ when any contribution is.
#[derive(Debug, Clone, PartialEq)]
pub struct EpceResult {
    pub value: f64,
    pub offenders: Vec<EpceOffender>,
}

/// Expected predictive cross-entropy over the risk set at t:
/// −(1/n_t) Σ { δ̃_i·[hazard bracket] + log π-survival(T̃_i|t) }, with the
/// hazard at T̃_i approximated by a forward difference
/// [1 − S(T̃+ε|T̃)]/ε or a central difference [S(T̃−ε|T̃) − S(T̃+ε|T̃)]/(2ε).
///
/// Under the central scheme a subject whose left point would precede the
/// landmark (T̃ − ε < t) falls back to the forward difference; its
/// `surv_central_left` is then absent by design. A missing left point when
/// T̃ − ε ≥ t is an input-plan error.
pub fn epce(
    items: &[EpceInput],
    t: f64,
    dt: f64,
    eps: f64,
    scheme: DiffScheme,
) -> Result<EpceResult> {
    if items.is_empty() {
        return Err(Error::invalid(format!("no subjects at risk at t={t}")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("ε must be positive, got {eps}")));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("window width must be positive"));
    }
    let mut offenders = Vec::new();
    let mut acc = 0.0;
    for it in items {
        if it.surv_anchor <= 0.0 {
            offenders.push(EpceOffender {
                id: it.id.clone(),
                reason: format!(
                    "π-survival(T̃={}|t={t}) = {} — certain event predicted for a \
                     subject that reached T̃",
                    it.t_tilde, it.surv_anchor
                ),
            });
            continue;
        }
        let mut term = ln_clamped(it.surv_anchor);
        if it.delta_tilde {
            let s_fwd = it.surv_fwd.ok_or_else(|| {
                Error::invalid(format!(
                    "event subject {} is missing π-survival(T̃+ε|T̃) from the plan",
                    it.id
                ))
            })?;
            let use_central = scheme == DiffScheme::Central && it.t_tilde - eps >= t;
            let bracket = if !use_central {
                {
                    let jump = 1.0 - s_fwd;
                    if jump <= 0.0 {
                        offenders.push(EpceOffender {
                            id: it.id.clone(),
                            reason: format!(
                                "π-survival(T̃+ε|T̃) = {s_fwd} — certain survival \
                                 predicted at an observed event time T̃={}",
                                it.t_tilde
                            ),
                        });
                        continue;
                    }
                    ln_clamped(jump) - eps.ln()
                }
            } else {
                {
                    let s_left = it.surv_central_left.ok_or_else(|| {
                        Error::invalid(format!(
                            "event subject {} is missing π-survival(T̃|T̃−ε) from \
                             the plan (central scheme, T̃−ε ≥ t)",
                            it.id
                        ))
                    })?;
                    if s_left <= 0.0 {
                        offenders.push(EpceOffender {
                            id: it.id.clone(),
                            reason: format!(
                                "π-survival(T̃|T̃−ε) = {s_left} — backward ratio \
                                 undefined at T̃={}",
                                it.t_tilde
                            ),
                        });
                        continue;
                    }
                    // S(T̃−ε|T̃) = 1 / S(T̃|T̃−ε) ≥ 1.
                    let diff = 1.0 / s_left - s_fwd;
                    if diff <= 0.0 {
                        offenders.push(EpceOffender {
                            id: it.id.clone(),
                            reason: format!(
                                "central difference S(T̃−ε|T̃) − S(T̃+ε|T̃) = {diff} \
                                 ≤ 0 at T̃={} — certain survival predicted at an \
                                 observed event time",
                                it.t_tilde
                            ),
                        });
                        continue;
                    }
                    diff.max(LOG_CLAMP).ln() - (2.0 * eps).ln()
                }
            };
            term += bracket;
        }
        acc += term;
    }
    if offenders.is_empty() {
        Ok(EpceResult {
            value: -acc / items.len() as f64,
            offenders,
        })
    } else {
        Ok(EpceResult {
            value: f64::INFINITY,
            offenders,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SubjectRecord;
    use approx::assert_abs_diff_eq;

    fn subject(id: &str, obs_time: f64, event: bool) -> SubjectRecord {
        SubjectRecord {
            id: id.to_string(),
            covariates: vec![],
            times: vec![0.0],
            values: vec![1.0],
            obs_time,
            event,
        }
    }

    #[test]
    fn reverse_km_no_censoring_is_one() {
        let data = Dataset::new(
            vec![
                subject("a", 2.0, true),
                subject("b", 3.0, true),
                subject("c", 5.0, true),
            ],
            vec![],
        )
        .unwrap();
        let g = reverse_km(&data, 0.0).unwrap();
        for s in [0.0, 2.0, 3.0, 5.0, 99.0] {
            assert_abs_diff_eq!(g.eval(s), 1.0, epsilon = 0.0);
        }
    }

    #[test]
    fn reverse_km_all_censored_at_five() {
        let data = Dataset::new(
            vec![
                subject("a", 5.0, false),
                subject("b", 5.0, false),
                subject("c", 5.0, false),
            ],
            vec![],
        )
        .unwrap();
        let g = reverse_km(&data, 0.0).unwrap();
        assert_abs_diff_eq!(g.eval(4.999), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(g.eval(5.0), 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(g.eval(9.0), 0.0, epsilon = 0.0);
        // Left limit at the jump is still 1.
        assert_abs_diff_eq!(g.eval_left(5.0), 1.0, epsilon = 0.0);
    }

    #[test]
    fn reverse_km_hand_product_limit() {
        // {(2, δ=0), (3, δ=1), (4, δ=0)} from t=0:
        // censoring jump at 2 with 3 at risk → 2/3; event at 3 leaves Ĝ
        // unchanged; censoring at 4 with 1 at risk → 0.
        let data = Dataset::new(
            vec![
                subject("a", 2.0, false),
                subject("b", 3.0, true),
                subject("c", 4.0, false),
            ],
            vec![],
        )
        .unwrap();
        let g = reverse_km(&data, 0.0).unwrap();
        assert_abs_diff_eq!(g.eval(1.9), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(g.eval(2.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.eval(3.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.eval(3.999), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.eval(4.0), 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(g.eval_left(4.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.eval_left(2.0), 1.0, epsilon = 0.0);
    }

    #[test]
    fn reverse_km_conditions_on_the_anchor() {
        // Subjects with T ≤ t drop out entirely.
        let data = Dataset::new(
            vec![
                subject("early", 1.0, false), // gone at t=2
                subject("a", 3.0, false),
                subject("b", 6.0, true),
            ],
            vec![],
        )
        .unwrap();
        let g = reverse_km(&data, 2.0).unwrap();
        // Risk set {a, b}; censoring at 3 with 2 at risk → 1/2.
        assert_abs_diff_eq!(g.eval(3.0), 0.5, epsilon = 1e-15);
        assert!(reverse_km(&data, 10.0).is_err());
    }

    fn brier_item(id: &str, obs: f64, event: bool, risk: f64) -> BrierInput {
        BrierInput {
            id: id.into(),
            obs_time: obs,
            event,
            risk,
            reanchored_risk: None,
        }
    }

    #[test]
    fn brier_ipcw_no_censoring_is_plain_mse() {
        // Mixed events/survivors, zero censoring.
        let data = Dataset::new(
            vec![
                subject("a", 1.0, true),
                subject("b", 2.5, true),
                subject("c", 9.0, true),
                subject("d", 7.0, true),
            ],
            vec![],
        )
        .unwrap();
        let g = reverse_km(&data, 0.0).unwrap();
        let items = vec![
            brier_item("a", 1.0, true, 0.7),
            brier_item("b", 2.5, true, 0.4),
            brier_item("c", 9.0, true, 0.2),
            brier_item("d", 7.0, true, 0.5),
        ];
        let (t, dt) = (0.0, 3.0);
        let got = brier_ipcw(&items, &g, t, dt).unwrap();
        // Plain MSE of indicator-vs-risk.
        let want =
            ((1.0 - 0.7f64).powi(2) + (1.0 - 0.4f64).powi(2) + 0.2f64.powi(2) + 0.5f64.powi(2))
                / 4.0;
        assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        // And equals the model-based estimator in this no-censoring case.
        let mb = brier_model_based(&items, t, dt).unwrap();
        assert_abs_diff_eq!(got, mb, epsilon = 1e-15);
    }

    #[test]
    fn brier_perfect_predictions_scores_zero() {
        let data = Dataset::new(
            vec![subject("a", 1.0, true), subject("b", 9.0, true)],
            vec![],
        )
        .unwrap();
        let g = reverse_km(&data, 0.0).unwrap();
        let items = vec![
            brier_item("a", 1.0, true, 1.0),
            brier_item("b", 9.0, true, 0.0),
        ];
        assert_abs_diff_eq!(
            brier_ipcw(&items, &g, 0.0, 3.0).unwrap(),
            0.0,
            epsilon = 0.0
        );
    }

    #[test]
    fn brier_ipcw_hand_weighted_sum() {
        // Four subjects, one censored inside (0, 3]:
        //   a: T=1 event, π=0.8 → Ŵ = 1/Ĝ(1−) = 1, contributes 0.04
        //   b: T=2 censored in-window → weight 0
        //   c: T=4 (survivor), π=0.3 → Ŵ = 1/Ĝ(3) = 3/2, contributes 0.135
        //   d: T=5 censored after window, π=0.1 → Ŵ = 3/2, contributes 0.015
        // total/4 = 0.0475
        let data = Dataset::new(
            vec![
                subject("a", 1.0, true),
                subject("b", 2.0, false),
                subject("c", 4.0, true),
                subject("d", 5.0, false),
            ],
            vec![],
        )
        .unwrap();
        let g = reverse_km(&data, 0.0).unwrap();
        assert_abs_diff_eq!(g.eval(3.0), 2.0 / 3.0, epsilon = 1e-15);
        let items = vec![
            brier_item("a", 1.0, true, 0.8),
            brier_item("b", 2.0, false, 0.5),
            brier_item("c", 4.0, true, 0.3),
            brier_item("d", 5.0, false, 0.1),
        ];
        let got = brier_ipcw(&items, &g, 0.0, 3.0).unwrap();
        assert_abs_diff_eq!(got, 0.0475, epsilon = 1e-15);
    }

    #[test]
    fn brier_ipcw_zero_weight_denominator_is_an_error() {
        // A curve whose estimated censoring survival hits zero before the
        // window end leaves a window survivor with an undefined weight.
        // (Within one dataset a survivor keeps the reverse-KM risk set
        // alive, so this arises when curve and items are decoupled.)
        let curve_data = Dataset::new(
            vec![
                subject("a", 1.0, false),
                subject("b", 2.0, false),
                subject("d", 2.5, false),
            ],
            vec![],
        )
        .unwrap();
        let g = reverse_km(&curve_data, 0.0).unwrap();
        assert_abs_diff_eq!(g.eval(3.0), 0.0, epsilon = 0.0);
        let items = vec![brier_item("c", 9.0, true, 0.5)];
        let err = brier_ipcw(&items, &g, 0.0, 3.0).unwrap_err();
        assert!(
            err.to_string().contains("subject c"),
            "error names the subject: {err}"
        );
    }

    #[test]
    fn brier_model_based_mixture_cases() {
        // χ = 1: in-window-censored treated as a sure event.
        let mut it = brier_item("a", 2.0, false, 0.8);
        it.reanchored_risk = Some(1.0);
        let got = brier_model_based(&[it], 0.0, 3.0).unwrap();
        assert_abs_diff_eq!(got, (1.0f64 - 0.8).powi(2), epsilon = 1e-15);
        // χ = 0.5, π̃ = 0.5 → 0.5·0.25 + 0.5·0.25 = 0.25.
        let mut it = brier_item("a", 2.0, false, 0.5);
        it.reanchored_risk = Some(0.5);
        let got = brier_model_based(&[it], 0.0, 3.0).unwrap();
        assert_abs_diff_eq!(got, 0.25, epsilon = 1e-15);
        // Missing re-anchored prediction is a plan error.
        let it = brier_item("a", 2.0, false, 0.5);
        assert!(brier_model_based(&[it], 0.0, 3.0).is_err());
    }

    #[test]
    fn ibs_examples_and_properties() {
        assert_abs_diff_eq!(ibs(0.06, 0.12, 2.0), 0.06, epsilon = 1e-15);
        assert_abs_diff_eq!(ibs(0.0, 0.0, 2.0), 0.0, epsilon = 0.0);
        assert_abs_diff_eq!(ibs(0.0, 0.6, 2.0), 0.1, epsilon = 1e-15);
        // Linearity in both arguments.
        let (a, b, c, d) = (0.03, 0.2, 0.11, 0.02);
        assert_abs_diff_eq!(
            ibs(a + c, b + d, 1.0),
            ibs(a, b, 1.0) + ibs(c, d, 1.0),
            epsilon = 1e-15
        );
        // Bounded by (5/6)·max(mid, end).
        for (m, e) in [(0.3, 0.1), (0.05, 0.9), (0.5, 0.5)] {
            assert!(ibs(m, e, 1.0) <= (5.0 / 6.0) * f64::max(m, e) + 1e-15);
        }
    }

    fn epce_event(id: &str, t_tilde: f64, surv_anchor: f64, surv_fwd: f64) -> EpceInput {
        EpceInput {
            id: id.into(),
            t_tilde,
            delta_tilde: true,
            surv_anchor,
            surv_fwd: Some(surv_fwd),
            surv_central_left: None,
        }
    }

    fn epce_censored(id: &str, t_tilde: f64, surv_anchor: f64) -> EpceInput {
        EpceInput {
            id: id.into(),
            t_tilde,
            delta_tilde: false,
            surv_anchor,
            surv_fwd: None,
            surv_central_left: None,
        }
    }

    #[test]
    fn epce_all_certain_survivors_is_zero() {
        let items = vec![
            epce_censored("a", 3.0, 1.0),
            epce_censored("b", 3.0, 1.0),
            epce_censored("c", 3.0, 1.0),
        ];
        let r = epce(&items, 1.0, 2.0, 1e-3, DiffScheme::Forward).unwrap();
        // log-clamp keeps log(1) at log(1−1e-12) ≈ −1e-12; effectively zero.
        assert!(r.value.abs() < 1e-11, "value {}", r.value);
        assert!(r.offenders.is_empty());
    }

    #[test]
    fn epce_single_event_constant_hazard_oracle() {
        // Constant hazard h: S(T̃|t) = e^{−h(T̃−t)}, S(T̃+ε|T̃) = e^{−hε}.
        // Exact cross-entropy term is −[log h + log S(T̃|t)]; the forward
        // estimate differs by O(ε).
        let h = 0.4f64;
        let (t, t_tilde) = (1.0, 3.5);
        let exact = -(h.ln() + (-h * (t_tilde - t)).exp().ln());
        for (eps, tol) in [(1e-3, 1e-3), (1e-4, 1e-4)] {
            let item = epce_event(
                "a",
                t_tilde,
                (-h * (t_tilde - t)).exp(),
                (-h * eps).exp(),
            );
            let r = epce(&[item], t, 5.0, eps, DiffScheme::Forward).unwrap();
            assert!(
                (r.value - exact).abs() < tol,
                "eps {eps}: got {} want {exact}",
                r.value
            );
        }
        // Central scheme: error O(ε²), so it is closer at the same ε.
        let eps = 1e-2;
        let mut item = epce_event("a", t_tilde, (-h * (t_tilde - t)).exp(), (-h * eps).exp());
        item.surv_central_left = Some((-h * eps).exp()); // S(T̃|T̃−ε)
        let rc = epce(&[item.clone()], t, 5.0, eps, DiffScheme::Central).unwrap();
        let rf = epce(&[item], t, 5.0, eps, DiffScheme::Forward).unwrap();
        assert!(
            (rc.value - exact).abs() < (rf.value - exact).abs(),
            "central {} should beat forward {} (exact {exact})",
            rc.value,
            rf.value
        );
        assert!((rc.value - exact).abs() < 5e-4);
    }

    #[test]
    fn epce_forward_vs_central_truncation_order() {
        // Rising hazard h(s) = 0.1 + 0.05 s (so h′ ≠ 0 and the forward error
        // has a genuine first-order term). Survival ratios are analytic:
        // Λ(a,b) = 0.1(b−a) + 0.025(b²−a²).
        let lam = |a: f64, b: f64| 0.1 * (b - a) + 0.025 * (b * b - a * a);
        let h = |s: f64| 0.1 + 0.05 * s;
        let (t, t_tilde) = (0.5, 4.0);
        let exact = -(h(t_tilde).ln() + (-lam(t, t_tilde)).exp().ln());
        let epsilons = [1e-2, 5e-3, 2.5e-3];
        let mut err_f = Vec::new();
        let mut err_c = Vec::new();
        for &eps in &epsilons {
            let mut item = epce_event(
                "a",
                t_tilde,
                (-lam(t, t_tilde)).exp(),
                (-lam(t_tilde, t_tilde + eps)).exp(),
            );
            let rf = epce(&[item.clone()], t, 5.0, eps, DiffScheme::Forward).unwrap();
            item.surv_central_left = Some((-lam(t_tilde - eps, t_tilde)).exp());
            let rc = epce(&[item], t, 5.0, eps, DiffScheme::Central).unwrap();
            err_f.push(((rf.value - exact).abs()).ln());
            err_c.push(((rc.value - exact).abs()).ln());
        }
        let slope = |errs: &[f64]| {
            let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
            let xm = xs.iter().sum::<f64>() / 3.0;
            let ym = errs.iter().sum::<f64>() / 3.0;
            let num: f64 = xs.iter().zip(errs).map(|(x, y)| (x - xm) * (y - ym)).sum();
            let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
            num / den
        };
        let sf = slope(&err_f);
        let sc = slope(&err_c);
        assert!((sf - 1.0).abs() < 0.3, "forward slope {sf}");
        assert!((sc - 2.0).abs() < 0.3, "central slope {sc}");
    }

    #[test]
    fn epce_zero_probability_yields_sentinel_with_offender() {
        // Certain survival predicted at an observed event → +∞ with the
        // subject named.
        let items = vec![
            epce_event("bad", 2.0, 0.9, 1.0),
            epce_censored("ok", 3.0, 0.8),
        ];
        let r = epce(&items, 0.0, 3.0, 1e-3, DiffScheme::Forward).unwrap();
        assert!(r.value.is_infinite() && r.value > 0.0);
        assert_eq!(r.offenders.len(), 1);
        assert_eq!(r.offenders[0].id, "bad");
        // Exact-zero anchored survival is also an offender.
        let items = vec![epce_censored("zero", 3.0, 0.0)];
        let r = epce(&items, 0.0, 3.0, 1e-3, DiffScheme::Forward).unwrap();
        assert!(r.value.is_infinite());
        assert_eq!(r.offenders[0].id, "zero");
    }

    #[test]
    fn epce_tiny_positive_probability_is_clamped_not_infinite() {
        let items = vec![epce_censored("tiny", 3.0, 1e-15)];
        let r = epce(&items, 0.0, 3.0, 1e-3, DiffScheme::Forward).unwrap();
        assert!(r.value.is_finite());
        assert!(r.offenders.is_empty());
        assert_abs_diff_eq!(r.value, -(1e-12f64).ln(), epsilon = 1e-6);
    }

    #[test]
    fn epce_halving_epsilon_is_stable_on_a_panel() {
        // 200 analytic subjects with heterogeneous constant hazards.
        let mut rng = crate::streams::stream(40, &[0]);
        use rand::Rng;
        let (t, dt) = (1.0, 3.0);
        let build = |eps: f64, rng: &mut rand_chacha::ChaCha12Rng| -> Vec<EpceInput> {
            (0..200)
                .map(|i| {
                    let h = 0.05 + 0.4 * rng.gen::<f64>();
                    let u: f64 = rng.gen::<f64>().max(1e-12);
                    let t_event = t - u.ln() / h;
                    let (t_tilde, delta) = if t_event <= t + dt {
                        (t_event, true)
                    } else {
                        (t + dt, false)
                    };
                    EpceInput {
                        id: format!("s{i}"),
                        t_tilde,
                        delta_tilde: delta,
                        surv_anchor: (-h * (t_tilde - t)).exp(),
                        surv_fwd: delta.then(|| (-h * eps).exp()),
                        surv_central_left: None,
                    }
                })
                .collect()
        };
        // Same subjects for both ε values: reset the stream.
        let mut rng1 = rng.clone();
        let a = epce(&build(1e-3, &mut rng1), t, dt, 1e-3, DiffScheme::Forward)
            .unwrap()
            .value;
        let b = epce(&build(5e-4, &mut rng), t, dt, 5e-4, DiffScheme::Forward)
            .unwrap()
            .value;
        assert!(
            (a - b).abs() / a.abs() < 0.01,
            "ε=1e-3 → {a}, ε=5e-4 → {b}"
        );
    }

    #[test]
    fn propriety_true_risks_beat_distortions_smoke() {
        // Small version of the propriety check: on simulated subjects with
        // known constant hazards, true predictions score no worse than
        // logit-distorted ones on both BS (no censoring ⇒ plain MSE) and EPCE.
        let mut rng = crate::streams::stream(41, &[0]);
        use rand::Rng;
        let (t, dt, eps) = (0.0, 2.0, 1e-3);
        let n = 2000;
        struct Subj {
            t_event: f64,
            h: f64,
        }
        let subs: Vec<Subj> = (0..n)
            .map(|_| {
                let h = (0.1f64).exp() * (0.8 * rng.gen::<f64>() + 0.1);
                let u: f64 = rng.gen::<f64>().max(1e-12);
                Subj {
                    t_event: -u.ln() / h,
                    h,
                }
            })
            .collect();
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let expit = |x: f64| 1.0 / (1.0 + (-x).exp());
        let distort = |p: f64, kind: usize| -> f64 {
            let p = p.clamp(1e-9, 1.0 - 1e-9);
            match kind {
                0 => (p + 0.1).min(1.0 - 1e-9),
                1 => (p - 0.1).max(1e-9),
                2 => expit(0.5 * logit(p)),
                3 => expit(2.0 * logit(p)),
                _ => expit(logit(p) + 0.5),
            }
        };
        // Brier: true risk π = 1 − e^{−h·dt}.
        let bs = |kind: Option<usize>| -> f64 {
            subs.iter()
                .map(|s| {
                    let p0 = 1.0 - (-s.h * dt).exp();
                    let p = kind.map_or(p0, |k| distort(p0, k));
                    let y = f64::from(s.t_event <= t + dt);
                    (y - p) * (y - p)
                })
                .sum::<f64>()
                / n as f64
        };
        let bs_true = bs(None);
        for k in 0..5 {
            assert!(
                bs(Some(k)) >= bs_true,
                "distortion {k} beat the truth on BS"
            );
        }
        // EPCE: the distortion must act on the whole predicted risk curve
        // F̃(u|t) = g(F(u|t)) so the forecast stays a coherent
        // (sub-)distribution; ε-step ratios then come from the distorted
        // curve, S̃(T̃+ε|T̃) = S̃(T̃+ε|t)/S̃(T̃|t).
        let epce_of = |kind: Option<usize>| -> f64 {
            let items: Vec<EpceInput> = subs
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let (t_tilde, delta) = if s.t_event <= t + dt {
                        (s.t_event, true)
                    } else {
                        (t + dt, false)
                    };
                    let surv_curve = |u: f64| -> f64 {
                        let f0 = 1.0 - (-s.h * (u - t)).exp();
                        1.0 - kind.map_or(f0, |k| distort(f0, k))
                    };
                    EpceInput {
                        id: format!("s{i}"),
                        t_tilde,
                        delta_tilde: delta,
                        surv_anchor: surv_curve(t_tilde),
                        surv_fwd: delta
                            .then(|| surv_curve(t_tilde + eps) / surv_curve(t_tilde)),
                        surv_central_left: None,
                    }
                })
                .collect();
            epce(&items, t, dt, eps, DiffScheme::Forward).unwrap().value
        };
        let e_true = epce_of(None);
        for k in 0..5 {
            assert!(
                epce_of(Some(k)) >= e_true,
                "distortion {k} beat the truth on EPCE ({} < {e_true})",
                epce_of(Some(k))
            );
        }
    }

    #[test]
    fn epce_central_falls_back_to_forward_near_the_landmark() {
        // Event just after the landmark: T̃ − ε < t, so the central scheme
        // scores this subject with the forward bracket and needs no left
        // point.
        let (t, eps) = (4.0, 1e-2);
        let item = epce_event("a", 4.005, 0.99, 0.995);
        let central = epce(&[item.clone()], t, 3.0, eps, DiffScheme::Central).unwrap();
        let forward = epce(&[item], t, 3.0, eps, DiffScheme::Forward).unwrap();
        assert_abs_diff_eq!(central.value, forward.value, epsilon = 0.0);
        // Away from the landmark a missing left point is a plan error.
        let item = epce_event("b", 6.0, 0.9, 0.995);
        assert!(epce(&[item], t, 3.0, eps, DiffScheme::Central).is_err());
    }

    #[test]
    fn epce_rejects_bad_epsilon_and_empty_input() {
        assert!(epce(&[], 0.0, 1.0, 1e-3, DiffScheme::Forward).is_err());
        let it = epce_censored("a", 1.0, 0.9);
        assert!(epce(&[it], 0.0, 1.0, 0.0, DiffScheme::Forward).is_err());
    }

    #[test]
    fn brier_requires_at_risk_subjects() {
        let data = Dataset::new(vec![subject("a", 5.0, true)], vec![]).unwrap();
        let g = reverse_km(&data, 0.0).unwrap();
        let items = vec![brier_item("a", 1.0, true, 0.5)];
        assert!(brier_ipcw(&items, &g, 2.0, 1.0).is_err());
        assert!(brier_model_based(&items, 2.0, 1.0).is_err());
    }
}
