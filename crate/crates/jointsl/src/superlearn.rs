//! Super learning over a library of joint models: V-fold cross-validated
//! dynamic predictions, time-interval-specific convex weight optimization,
//! and discrete/ensemble super-learner identification.
//!
//! The pipeline is: `cv_predictions` fits every library model on each
//! fold-excluded training set and fills a [`PredictionCube`] with every
//! conditional probability the requested metrics will need; per (landmark,
//! metric), `optimize_weights` minimizes the cross-validated score of the
//! convex combination over the simplex, and the panel records per-model
//! scores, the discrete super learner (dSL), and the ensemble super
//! learner (eSL).

use crate::data::{interval_outcome, Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::jointmodel::{
    fit_mcmc, JointModelSpec, McmcConfig, ModelFrame, PosteriorDraws, PriorSpec,
};
use crate::dynpred::{conditional_risks, required_evaluations, EvalPair, PointRole, RiskConfig};
use crate::numerics::{nelder_mead_min, softmax};
use crate::scoring::{
    brier_ipcw, brier_model_based, epce, ibs, reverse_km, BrierInput, DiffScheme, EpceInput,
    Metric,
};
use crate::streams::{self, tags};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One library member: a model specification plus its prior settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryMember {
    pub spec: JointModelSpec,
    #[serde(default)]
    pub priors: PriorSpec,
}

/// The model library L = {M₁, …, M_L}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLibrary {
    pub members: Vec<LibraryMember>,
}

impl ModelLibrary {
    /// Validates unique names and per-member specs. Single-member libraries
    /// are allowed at this level (the mechanical operations are well defined
    /// for L = 1); the user-facing super-learning entry points require L ≥ 2.
    pub fn new(members: Vec<LibraryMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("the model library is empty"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &members {
            m.spec.validate()?;
            m.priors.validate()?;
            if !seen.insert(m.spec.name.clone()) {
                return Err(Error::invalid(format!(
                    "duplicate model name '{}' in the library",
                    m.spec.name
                )));
            }
        }
        Ok(Self { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.members.iter().map(|m| m.spec.name.clone()).collect()
    }
}

/// Settings shared by all prediction/fit stages of a super-learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSettings {
    pub mc_draws: usize,
    pub eps: f64,
    pub scheme: DiffScheme,
    pub seed: u64,
    pub mcmc: McmcConfig,
}

impl Default for PredictSettings {
    fn default() -> Self {
        Self {
            mc_draws: crate::dynpred::DEFAULT_MC_DRAWS,
            eps: crate::scoring::DEFAULT_EPSILON,
            scheme: DiffScheme::Forward,
            seed: 0,
            mcmc: McmcConfig::default(),
        }
    }
}

/// Cross-validated (or test-time) predictions for one subject at one
/// landmark: the deduplicated evaluation plan and, per model, the
/// conditional risk π(target|anchor) aligned with the plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectCell {
    /// Index into the dataset's subject list.
    pub subject_index: usize,
    pub plan: Vec<EvalPair>,
    /// `probs[l][k]` = model l's risk for plan entry k.
    pub probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkCube {
    pub t: f64,
    pub cells: Vec<SubjectCell>,
}

/// Every conditional probability needed to score every requested metric at
/// every landmark, for every at-risk subject and every library model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCube {
    pub landmarks: Vec<f64>,
    pub dt: f64,
    pub metrics: Vec<Metric>,
    pub eps: f64,
    pub scheme: DiffScheme,
    pub n_models: usize,
    pub per_landmark: Vec<LandmarkCube>,
    /// Number of model fits performed while building the cube.
    pub n_fits: usize,
}

/// A score that serializes as a JSON number when finite and as the string
/// "inf" when the estimator propagated an infinite contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score(pub f64);

impl Serialize for Score {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Score(x)),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(Score(f64::INFINITY)),
                "-inf" => Ok(Score(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "invalid score string '{other}'"
                ))),
            },
        }
    }
}

/// The convex weights minimizing one (landmark, metric) cross-validated
/// score, with optimizer diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub landmark: f64,
    pub metric: Metric,
    /// Strictly positive, sums to one.
    pub weights: Vec<f64>,
    pub score: Score,
    pub starts_tried: usize,
    pub best_start: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-(landmark, metric) summary: member scores, eSL, dSL, and the
/// selected candidate when the eSL competes in the discrete selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPanel {
    pub landmark: f64,
    pub metric: Metric,
    /// Cross-validated score per library member, in library order.
    pub member_scores: Vec<Score>,
    pub esl: WeightSolution,
    /// Discrete super learner: argmin over library members only (ties by
    /// library order), so `member_scores[dsl_index]` is the member minimum.
    pub dsl_index: usize,
    pub dsl_name: String,
    /// Winner when the eSL is entered as an additional candidate in the
    /// discrete selection; the eSL wins only on a strict improvement.
    pub selected: String,
    pub esl_beats_dsl: bool,
}

/// The full training-time result: one panel per (landmark, metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePanel {
    pub landmarks: Vec<f64>,
    pub dt: f64,
    pub metrics: Vec<Metric>,
    pub eps: f64,
    pub scheme: DiffScheme,
    pub model_names: Vec<String>,
    pub folds: usize,
    pub seed: u64,
    pub intervals: Vec<IntervalPanel>,
}

impl ScorePanel {
    pub fn interval(&self, landmark: f64, metric: Metric) -> Option<&IntervalPanel> {
        self.intervals
            .iter()
            .find(|p| p.landmark == landmark && p.metric == metric)
    }
}

/// Derives a fit seed for one (stage, slot, model) job from the master seed.
/// Stage 1 = fold fits (slot = fold), stage 2 = full-data fits (slot = 0).
fn fit_seed(master: u64, stage: u64, slot: u64, model: u64) -> u64 {
    streams::stream(master, &[tags::FIT, stage, slot, model]).gen::<u64>()
}

/// Deduplicated union of each metric's evaluation plan for one subject.
fn subject_plan(
    metrics: &[Metric],
    t: f64,
    dt: f64,
    record: &crate::data::SubjectRecord,
    eps: f64,
    scheme: DiffScheme,
) -> Result<Vec<EvalPair>> {
    let mut plan: Vec<EvalPair> = Vec::new();
    for &m in metrics {
        for pair in required_evaluations(m, t, dt, record, eps, scheme)? {
            if !plan.contains(&pair) {
                plan.push(pair);
            }
        }
    }
    Ok(plan)
}

/// Fills one subject's per-model risks for its plan, grouping plan entries
/// by anchor so each anchor costs a single Monte Carlo pass.
fn fill_cell(
    frame: &ModelFrame,
    fit: &PosteriorDraws,
    record: &crate::data::SubjectRecord,
    t: f64,
    plan: &[EvalPair],
    model_index: usize,
    settings: &PredictSettings,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; plan.len()];
    // Group by anchor bit pattern, preserving first-seen order.
    let mut groups: Vec<(u64, Vec<usize>)> = Vec::new();
    for (k, pair) in plan.iter().enumerate() {
        let bits = pair.anchor.to_bits();
        match groups.iter_mut().find(|(b, _)| *b == bits) {
            Some((_, idxs)) => idxs.push(k),
            None => groups.push((bits, vec![k])),
        }
    }
    for (bits, idxs) in groups {
        let anchor = f64::from_bits(bits);
        let targets: Vec<f64> = idxs.iter().map(|&k| plan[k].target).collect();
        let res = conditional_risks(
            frame,
            fit,
            record,
            t,
            anchor,
            &targets,
            &RiskConfig {
                mc_draws: settings.mc_draws,
                seed: settings.seed,
                model_index: model_index as u64,
            },
        )?;
        for (j, &k) in idxs.iter().enumerate() {
            out[k] = res.risk[j];
        }
    }
    Ok(out)
}

/// Builds a cube where subject i's predictions under model l come from
/// `fits[slot_of[i]][l]` (cross-validation passes the fold index; test-time
/// evaluation passes a single slot). `n_fits` is filled by the caller.
fn assemble_cube(
    data: &Dataset,
    slot_of: &[usize],
    fits: &[Vec<(ModelFrame, PosteriorDraws)>],
    landmarks: &[f64],
    dt: f64,
    metrics: &[Metric],
    settings: &PredictSettings,
) -> Result<PredictionCube> {
    if landmarks.is_empty() {
        return Err(Error::invalid("at least one landmark is required"));
    }
    if metrics.is_empty() {
        return Err(Error::invalid("at least one metric is required"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("window width must be positive"));
    }
    let n_models = fits[0].len();
    let mut per_landmark = Vec::with_capacity(landmarks.len());
    for &t in landmarks {
        // Per-subject work is independent (each risk has its own derived
        // stream), so the cells parallelize without changing the result.
        let at_risk: Vec<usize> = data.risk_set(t);
        let cells: Vec<SubjectCell> = at_risk
            .par_iter()
            .map(|&i| {
                let rec = &data.subjects[i];
                let plan = subject_plan(metrics, t, dt, rec, settings.eps, settings.scheme)?;
                let mut probs = Vec::with_capacity(n_models);
                for l in 0..n_models {
                    let (frame, fit) = &fits[slot_of[i]][l];
                    probs.push(fill_cell(frame, fit, rec, t, &plan, l, settings)?);
                }
                Ok(SubjectCell {
                    subject_index: i,
                    plan,
                    probs,
                })
            })
            .collect::<Result<_>>()?;
        if cells.is_empty() {
            return Err(Error::invalid(format!(
                "no subjects at risk at landmark t={t}"
            )));
        }
        per_landmark.push(LandmarkCube { t, cells });
    }
    Ok(PredictionCube {
        landmarks: landmarks.to_vec(),
        dt,
        metrics: metrics.to_vec(),
        eps: settings.eps,
        scheme: settings.scheme,
        n_models,
        per_landmark,
        n_fits: 0,
    })
}

/// Fits each library model on each fold-excluded training set and computes
/// every held-out subject's evaluation-plan probabilities from the fit that
/// excludes its own fold. Fit failures are collected across all (fold,
/// model) jobs and reported together.
pub fn cv_predictions(
    library: &ModelLibrary,
    data: &Dataset,
    folds: &FoldAssignment,
    landmarks: &[f64],
    dt: f64,
    metrics: &[Metric],
    settings: &PredictSettings,
) -> Result<PredictionCube> {
    if folds.fold_of.len() != data.len() {
        return Err(Error::invalid(format!(
            "fold assignment covers {} subjects but the dataset has {}",
            folds.fold_of.len(),
            data.len()
        )));
    }
    // Every (landmark, fold) must keep a non-empty held-out risk set.
    for &t in landmarks {
        let mut at_risk = vec![0usize; folds.v];
        for (i, rec) in data.subjects.iter().enumerate() {
            if rec.at_risk(t) {
                at_risk[folds.fold_of[i]] += 1;
            }
        }
        if let Some(v) = at_risk.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!(
                "fold {v} has no subjects at risk at landmark t={t}"
            )));
        }
    }

    let l_count = library.len();
    let trains: Vec<Dataset> = (0..folds.v)
        .map(|v| data.split_by_fold(folds, v).0)
        .collect();
    // All V × L fit jobs are independent; seeds are derived per (fold,
    // model), so parallel execution reproduces the sequential result.
    let jobs: Vec<(usize, usize)> = (0..folds.v)
        .flat_map(|v| (0..l_count).map(move |l| (v, l)))
        .collect();
    let results: Vec<std::result::Result<(ModelFrame, PosteriorDraws), String>> = jobs
        .par_iter()
        .map(|&(v, l)| {
            let member = &library.members[l];
            let train = &trains[v];
            let mut cfg = settings.mcmc.clone();
            cfg.seed = fit_seed(settings.seed, 1, v as u64, l as u64);
            cfg.store_random_effects = false;
            let label = |e: &Error| format!("fold {v}, model '{}': {e}", member.spec.name);
            let fit = fit_mcmc(&member.spec, &member.priors, train, &cfg)
                .map_err(|e| label(&e))?;
            let frame =
                ModelFrame::from_resolved(&member.spec, &fit.meta.resolved, &train.covariate_names)
                    .map_err(|e| label(&e))?;
            Ok((frame, fit))
        })
        .collect();
    let mut fits: Vec<Vec<(ModelFrame, PosteriorDraws)>> =
        (0..folds.v).map(|_| Vec::with_capacity(l_count)).collect();
    let mut failures: Vec<String> = Vec::new();
    for (&(v, _), res) in jobs.iter().zip(results) {
        match res {
            Ok(pair) => fits[v].push(pair),
            Err(msg) => failures.push(msg),
        }
    }
    if !failures.is_empty() {
        return Err(Error::numerical(format!(
            "{} of {} cross-validation fits failed:\n  {}",
            failures.len(),
            folds.v * l_count,
            failures.join("\n  ")
        )));
    }

    let mut cube = assemble_cube(data, &folds.fold_of, &fits, landmarks, dt, metrics, settings)?;
    cube.n_fits = folds.v * l_count;
    Ok(cube)
}

/// Convex combination of the L model predictions for one plan entry.
pub fn ensemble_combine(cell: &SubjectCell, weights: &[f64], pair_index: usize) -> Result<f64> {
    if pair_index >= cell.plan.len() {
        return Err(Error::invalid(format!(
            "plan entry {pair_index} does not exist for subject {}",
            cell.subject_index
        )));
    }
    if weights.len() != cell.probs.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} models",
            weights.len(),
            cell.probs.len()
        )));
    }
    Ok(weights
        .iter()
        .zip(&cell.probs)
        .map(|(w, p)| w * p[pair_index])
        .sum())
}

fn find_pair(cell: &SubjectCell, role: PointRole) -> Option<usize> {
    cell.plan.iter().position(|p| p.role == role)
}

fn require_pair(cell: &SubjectCell, role: PointRole, what: &str) -> Result<usize> {
    find_pair(cell, role).ok_or_else(|| {
        Error::invalid(format!(
            "cube is missing the {what} entry for subject index {}",
            cell.subject_index
        ))
    })
}

/// Scores the weighted ensemble on one (landmark, metric) from the cube.
///
/// IPCW censoring weights use the reverse Kaplan–Meier curve of the scored
/// dataset's risk set at t. EPCE scores survival probabilities 1 − π̃; the
/// convex combination commutes with that complement by linearity.
pub fn score_with_weights(
    cube: &PredictionCube,
    data: &Dataset,
    landmark_index: usize,
    metric: Metric,
    weights: &[f64],
) -> Result<f64> {
    let lc = &cube.per_landmark[landmark_index];
    let t = lc.t;
    let dt = cube.dt;
    match metric {
        Metric::IbsIpcw | Metric::IbsModel => {
            let curve = if metric == Metric::IbsIpcw {
                Some(reverse_km(data, t)?)
            } else {
                None
            };
            let mut mid_items = Vec::with_capacity(lc.cells.len());
            let mut end_items = Vec::with_capacity(lc.cells.len());
            for cell in &lc.cells {
                let rec = &data.subjects[cell.subject_index];
                let mid_idx = require_pair(cell, PointRole::IbsMid, "midpoint risk")?;
                let end_idx = require_pair(cell, PointRole::IbsEnd, "window-end risk")?;
                let risk_mid = ensemble_combine(cell, weights, mid_idx)?;
                let risk_end = ensemble_combine(cell, weights, end_idx)?;
                let (reanchor_mid, reanchor_end) = if metric == Metric::IbsModel
                    && !rec.event
                    && rec.obs_time <= t + dt
                {
                    let e = require_pair(cell, PointRole::Reanchor, "re-anchored risk")?;
                    let end_val = Some(ensemble_combine(cell, weights, e)?);
                    let mid_val = if rec.obs_time <= t + dt / 2.0 {
                        let m = require_pair(
                            cell,
                            PointRole::ReanchorMid,
                            "re-anchored midpoint risk",
                        )?;
                        Some(ensemble_combine(cell, weights, m)?)
                    } else {
                        None
                    };
                    (mid_val, end_val)
                } else {
                    (None, None)
                };
                mid_items.push(BrierInput {
                    id: rec.id.clone(),
                    obs_time: rec.obs_time,
                    event: rec.event,
                    risk: risk_mid,
                    reanchored_risk: reanchor_mid,
                });
                end_items.push(BrierInput {
                    id: rec.id.clone(),
                    obs_time: rec.obs_time,
                    event: rec.event,
                    risk: risk_end,
                    reanchored_risk: reanchor_end,
                });
            }
            let (bs_mid, bs_end) = match &curve {
                Some(g) => (
                    brier_ipcw(&mid_items, g, t, dt / 2.0)?,
                    brier_ipcw(&end_items, g, t, dt)?,
                ),
                None => (
                    brier_model_based(&mid_items, t, dt / 2.0)?,
                    brier_model_based(&end_items, t, dt)?,
                ),
            };
            Ok(ibs(bs_mid, bs_end, dt))
        }
        Metric::Epce => {
            let mut items = Vec::with_capacity(lc.cells.len());
            for cell in &lc.cells {
                let rec = &data.subjects[cell.subject_index];
                let (t_tilde, delta_tilde) = interval_outcome(rec, t, dt)?;
                let anchor_idx = require_pair(cell, PointRole::EpceAnchor, "EPCE survival")?;
                let surv_anchor = 1.0 - ensemble_combine(cell, weights, anchor_idx)?;
                let surv_fwd = if delta_tilde {
                    let k = require_pair(cell, PointRole::EpceForward, "EPCE forward bracket")?;
                    Some(1.0 - ensemble_combine(cell, weights, k)?)
                } else {
                    None
                };
                let surv_central_left = if delta_tilde && cube.scheme == DiffScheme::Central {
                    find_pair(cell, PointRole::EpceCentralLeft)
                        .map(|k| ensemble_combine(cell, weights, k).map(|r| 1.0 - r))
                        .transpose()?
                } else {
                    None
                };
                items.push(EpceInput {
                    id: rec.id.clone(),
                    t_tilde,
                    delta_tilde,
                    surv_anchor,
                    surv_fwd,
                    surv_central_left,
                });
            }
            Ok(epce(&items, t, dt, cube.eps, cube.scheme)?.value)
        }
    }
}

/// Number of Nelder–Mead iterations per start.
const NM_MAX_ITER: usize = 400;
const NM_TOL: f64 = 1e-9;

/// Minimizes the cross-validated score over the open simplex via a softmax
/// reparameterization with the first logit pinned at 0, multistarting from
/// uniform weights and from each vertex (L+1 starts).
pub fn optimize_weights(
    cube: &PredictionCube,
    data: &Dataset,
    landmark_index: usize,
    metric: Metric,
) -> Result<WeightSolution> {
    let l_count = cube.n_models;
    let weights_of = |z: &[f64]| -> Result<Vec<f64>> {
        let mut logits = Vec::with_capacity(l_count);
        logits.push(0.0);
        logits.extend_from_slice(z);
        softmax(&logits)
    };
    let objective = |z: &[f64]| -> f64 {
        match weights_of(z) {
            Ok(w) => score_with_weights(cube, data, landmark_index, metric, &w)
                .unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };

    // Start 0: uniform; start j ≥ 1: vertex for model j.
    let mut starts = Vec::with_capacity(l_count + 1);
    starts.push(vec![0.0; l_count - 1]);
    for j in 0..l_count {
        let mut z = vec![-30.0; l_count - 1];
        if j > 0 {
            z[j - 1] = 30.0;
        }
        starts.push(z);
    }

    let mut best: Option<(usize, crate::numerics::NelderMeadResult)> = None;
    let mut start_failures = Vec::new();
    for (s, z0) in starts.iter().enumerate() {
        if l_count == 1 {
            // Zero-dimensional problem: the only weight vector is (1).
            let f = objective(&[]);
            if f.is_finite() {
                best = Some((
                    s,
                    crate::numerics::NelderMeadResult {
                        x: vec![],
                        f,
                        iterations: 0,
                        converged: true,
                    },
                ));
                break;
            }
            start_failures.push(format!("start {s}: objective is not finite"));
            continue;
        }
        match nelder_mead_min(objective, z0, NM_TOL, NM_MAX_ITER) {
            Ok(res) => {
                if res.f.is_finite()
                    && best.as_ref().is_none_or(|(_, b)| res.f < b.f)
                {
                    best = Some((s, res));
                }
            }
            Err(e) => start_failures.push(format!("start {s}: {e}")),
        }
    }
    let (best_start, result) = best.ok_or_else(|| {
        Error::numerical(format!(
            "weight optimization failed at landmark {} for {}: every start was \
             rejected:\n  {}",
            cube.per_landmark[landmark_index].t,
            metric,
            start_failures.join("\n  ")
        ))
    })?;
    let weights = weights_of(&result.x)?;
    Ok(WeightSolution {
        landmark: cube.per_landmark[landmark_index].t,
        metric,
        weights,
        score: Score(result.f),
        starts_tried: starts.len(),
        best_start,
        iterations: result.iterations,
        converged: result.converged,
    })
}

/// Argmin over per-model scores; ties break toward the lower library index.
pub fn discrete_super_learner(scores: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

/// Unit-vector weights for library member `l`.
fn vertex(l: usize, l_count: usize) -> Vec<f64> {
    let mut w = vec![0.0; l_count];
    w[l] = 1.0;
    w
}

/// Builds the full training-time score panel from a cube: per (landmark,
/// metric) member scores, optimized eSL weights, dSL identity, and the
/// eSL-as-candidate selection.
pub fn build_panel(
    cube: &PredictionCube,
    data: &Dataset,
    library_names: &[String],
    folds: usize,
    seed: u64,
) -> Result<ScorePanel> {
    let mut intervals = Vec::new();
    for (qi, lc) in cube.per_landmark.iter().enumerate() {
        for &metric in &cube.metrics {
            let member_scores: Vec<f64> = (0..cube.n_models)
                .map(|l| {
                    score_with_weights(cube, data, qi, metric, &vertex(l, cube.n_models))
                })
                .collect::<Result<_>>()?;
            let esl = optimize_weights(cube, data, qi, metric)?;
            let dsl_index = discrete_super_learner(&member_scores);
            let esl_beats_dsl = esl.score.0 < member_scores[dsl_index];
            let selected = if esl_beats_dsl {
                "esl".to_string()
            } else {
                library_names[dsl_index].clone()
            };
            intervals.push(IntervalPanel {
                landmark: lc.t,
                metric,
                member_scores: member_scores.iter().map(|&s| Score(s)).collect(),
                esl,
                dsl_index,
                dsl_name: library_names[dsl_index].clone(),
                selected,
                esl_beats_dsl,
            });
        }
    }
    Ok(ScorePanel {
        landmarks: cube.landmarks.clone(),
        dt: cube.dt,
        metrics: cube.metrics.clone(),
        eps: cube.eps,
        scheme: cube.scheme,
        model_names: library_names.to_vec(),
        folds,
        seed,
        intervals,
    })
}

/// Cross-validates, optimizes, and assembles the panel in one call.
/// Requires L ≥ 2 (a single-model library has nothing to combine).
pub fn train_super_learner(
    library: &ModelLibrary,
    data: &Dataset,
    folds: &FoldAssignment,
    landmarks: &[f64],
    dt: f64,
    metrics: &[Metric],
    settings: &PredictSettings,
) -> Result<(ScorePanel, PredictionCube)> {
    if library.len() < 2 {
        return Err(Error::invalid(
            "super learning needs a library of at least two models",
        ));
    }
    let cube = cv_predictions(library, data, folds, landmarks, dt, metrics, settings)?;
    let panel = build_panel(&cube, data, &library.names(), folds.v, settings.seed)?;
    Ok((panel, cube))
}

/// Fits every library model on the full training data (stage-2 seeds).
pub fn fit_library_full(
    library: &ModelLibrary,
    data: &Dataset,
    settings: &PredictSettings,
) -> Result<Vec<(ModelFrame, PosteriorDraws)>> {
    let results: Vec<std::result::Result<(ModelFrame, PosteriorDraws), String>> = library
        .members
        .par_iter()
        .enumerate()
        .map(|(l, member)| {
            let mut cfg = settings.mcmc.clone();
            cfg.seed = fit_seed(settings.seed, 2, 0, l as u64);
            cfg.store_random_effects = false;
            let label = |e: &Error| format!("model '{}': {e}", member.spec.name);
            let fit = fit_mcmc(&member.spec, &member.priors, data, &cfg)
                .map_err(|e| label(&e))?;
            let frame =
                ModelFrame::from_resolved(&member.spec, &fit.meta.resolved, &data.covariate_names)
                    .map_err(|e| label(&e))?;
            Ok((frame, fit))
        })
        .collect();
    let mut fits = Vec::with_capacity(library.len());
    let mut failures = Vec::new();
    for res in results {
        match res {
            Ok(pair) => fits.push(pair),
            Err(msg) => failures.push(msg),
        }
    }
    if failures.is_empty() {
        Ok(fits)
    } else {
        Err(Error::numerical(format!(
            "{} of {} full-data fits failed:\n  {}",
            failures.len(),
            library.len(),
            failures.join("\n  ")
        )))
    }
}

/// Test-set evaluation of one (landmark, metric): the frozen training
/// weights applied to test predictions, each member's own test score, the
/// train-selected dSL's test score, and the oracle (the best single model
/// on the test set — knowable only with the test data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEvaluation {
    pub landmark: f64,
    pub metric: Metric,
    pub member_scores: Vec<Score>,
    pub esl_score: Score,
    pub dsl_score: Score,
    pub selected_score: Score,
    pub oracle_score: Score,
    pub oracle_index: usize,
}

/// Scores frozen training weights on a test dataset using full-train fits.
/// The test cube anchors censoring weights and risk sets in the test data.
pub fn evaluate_on_test(
    fits: &[(ModelFrame, PosteriorDraws)],
    test: &Dataset,
    panel: &ScorePanel,
    settings: &PredictSettings,
) -> Result<Vec<TestEvaluation>> {
    if fits.len() != panel.model_names.len() {
        return Err(Error::invalid(format!(
            "{} fits for a panel of {} models",
            fits.len(),
            panel.model_names.len()
        )));
    }
    let slot_of = vec![0usize; test.len()];
    let fits_by_slot = vec![fits.to_vec()];
    let cube = assemble_cube(
        test,
        &slot_of,
        &fits_by_slot,
        &panel.landmarks,
        panel.dt,
        &panel.metrics,
        settings,
    )?;
    let l_count = cube.n_models;
    let mut out = Vec::new();
    for (qi, lc) in cube.per_landmark.iter().enumerate() {
        for &metric in &panel.metrics {
            let ip = panel.interval(lc.t, metric).ok_or_else(|| {
                Error::invalid(format!(
                    "panel holds no interval for landmark {} and {}",
                    lc.t, metric
                ))
            })?;
            let member_scores: Vec<f64> = (0..l_count)
                .map(|l| score_with_weights(&cube, test, qi, metric, &vertex(l, l_count)))
                .collect::<Result<_>>()?;
            let esl_score = score_with_weights(&cube, test, qi, metric, &ip.esl.weights)?;
            let oracle_index = discrete_super_learner(&member_scores);
            let dsl_score = member_scores[ip.dsl_index];
            let selected_score = if ip.esl_beats_dsl {
                esl_score
            } else {
                dsl_score
            };
            out.push(TestEvaluation {
                landmark: lc.t,
                metric,
                member_scores: member_scores.iter().map(|&s| Score(s)).collect(),
                esl_score: Score(esl_score),
                dsl_score: Score(dsl_score),
                selected_score: Score(selected_score),
                oracle_score: Score(member_scores[oracle_index]),
                oracle_index,
            })
        }
    }
    Ok(out)
}
