//! Canonical data model: subject records, datasets, stratified fold
//! assignment, risk sets, and interval outcomes.

use crate::error::{Error, Result};
use crate::streams::{self, tags};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// One subject: a longitudinal measurement series plus a right-censored
/// time-to-event outcome and baseline covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    /// Opaque identifier, unique within a dataset.
    pub id: String,
    /// Baseline covariates w_i (same length for every subject in a dataset).
    pub covariates: Vec<f64>,
    /// Measurement times, strictly increasing, all ≥ 0.
    pub times: Vec<f64>,
    /// Measurements, same length as `times`.
    pub values: Vec<f64>,
    /// Observed event or censoring time; ≥ the last measurement time.
    pub obs_time: f64,
    /// True when the observed time is an event, false when censored.
    pub event: bool,
}

impl SubjectRecord {
    /// Checks the record invariants.
    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::invalid(format!(
                "subject {}: needs at least one measurement",
                self.id
            )));
        }
        if self.times.len() != self.values.len() {
            return Err(Error::invalid(format!(
                "subject {}: {} measurement times but {} values",
                self.id,
                self.times.len(),
                self.values.len()
            )));
        }
        let mut prev = -f64::INFINITY;
        for &t in &self.times {
            if !t.is_finite() || t < 0.0 || t <= prev {
                return Err(Error::invalid(format!(
                    "subject {}: measurement times must be strictly increasing and >= 0 \
                     (offending time {t})",
                    self.id
                )));
            }
            prev = t;
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "subject {}: non-finite measurement value",
                self.id
            )));
        }
        if !(self.obs_time.is_finite() && self.obs_time > 0.0) {
            return Err(Error::invalid(format!(
                "subject {}: observed time must be positive and finite, got {}",
                self.id, self.obs_time
            )));
        }
        if self.obs_time < prev {
            return Err(Error::invalid(format!(
                "subject {}: observed time {} precedes the last measurement at {}",
                self.id, self.obs_time, prev
            )));
        }
        if self.covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "subject {}: non-finite covariate",
                self.id
            )));
        }
        Ok(())
    }

    /// Number of measurements taken at or before time `t`.
    pub fn history_len(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t)
    }

    /// True when the subject is still at risk at `t` (strict inequality).
    pub fn at_risk(&self, t: f64) -> bool {
        self.obs_time > t
    }
}

/// A dataset: subjects plus covariate labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub subjects: Vec<SubjectRecord>,
    pub covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(subjects: Vec<SubjectRecord>, covariate_names: Vec<String>) -> Result<Self> {
        let d = Self {
            subjects,
            covariate_names,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for s in &self.subjects {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::invalid(format!("duplicate subject id {}", s.id)));
            }
            if s.covariates.len() != self.covariate_names.len() {
                return Err(Error::invalid(format!(
                    "subject {}: {} covariates but {} covariate names",
                    s.id,
                    s.covariates.len(),
                    self.covariate_names.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.subjects.iter().filter(|s| s.event).count()
    }

    /// Fraction of censored subjects.
    pub fn censoring_rate(&self) -> f64 {
        if self.subjects.is_empty() {
            return 0.0;
        }
        1.0 - self.n_events() as f64 / self.subjects.len() as f64
    }

    /// Indices of subjects at risk at `t`: exactly those with obs_time > t.
    pub fn risk_set(&self, t: f64) -> Vec<usize> {
        self.subjects
            .iter()
            .enumerate()
            .filter(|(_, s)| s.at_risk(t))
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of events observed in the interval (a, b].
    pub fn events_in(&self, a: f64, b: f64) -> usize {
        self.subjects
            .iter()
            .filter(|s| s.event && s.obs_time > a && s.obs_time <= b)
            .count()
    }

    /// Largest observed time.
    pub fn max_obs_time(&self) -> f64 {
        self.subjects
            .iter()
            .map(|s| s.obs_time)
            .fold(0.0, f64::max)
    }

    /// Empirical quantile of observed times (type-7 interpolation).
    pub fn obs_time_quantile(&self, q: f64) -> f64 {
        let mut v: Vec<f64> = self.subjects.iter().map(|s| s.obs_time).collect();
        quantile_sorted(&mut v, q)
    }

    /// Empirical quantile of event times only.
    pub fn event_time_quantile(&self, q: f64) -> Option<f64> {
        let mut v: Vec<f64> = self
            .subjects
            .iter()
            .filter(|s| s.event)
            .map(|s| s.obs_time)
            .collect();
        if v.is_empty() {
            return None;
        }
        Some(quantile_sorted(&mut v, q))
    }

    /// Returns a dataset containing only the subjects whose positional fold
    /// differs from `fold` (training split) and one with the fold's subjects
    /// (held-out split).
    pub fn split_by_fold(&self, folds: &FoldAssignment, fold: usize) -> (Dataset, Dataset) {
        let mut train = Vec::new();
        let mut held = Vec::new();
        for (i, s) in self.subjects.iter().enumerate() {
            if folds.fold_of[i] == fold {
                held.push(s.clone());
            } else {
                train.push(s.clone());
            }
        }
        (
            Dataset {
                subjects: train,
                covariate_names: self.covariate_names.clone(),
            },
            Dataset {
                subjects: held,
                covariate_names: self.covariate_names.clone(),
            },
        )
    }
}

fn quantile_sorted(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.is_empty() {
        return f64::NAN;
    }
    let q = q.clamp(0.0, 1.0);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        let w = pos - lo as f64;
        v[lo] * (1.0 - w) + v[hi] * w
    }
}

/// Event-stratified fold assignment; `fold_of[i]` is the positional fold
/// (0-based) of subject index `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub v: usize,
    pub fold_of: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.v];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Assigns subjects to `v` folds: the event stratum and the censored stratum
/// are each shuffled (deterministically from the seed) and dealt round-robin,
/// so event counts per fold differ by at most one.
///
/// The assignment depends only on subject *positions* and outcome labels,
/// never on ids, so relabeling ids cannot change the folds.
pub fn assign_folds(data: &Dataset, v: usize, seed: u64) -> Result<FoldAssignment> {
    if v < 2 {
        return Err(Error::invalid(format!("fold count must be >= 2, got {v}")));
    }
    let n_events = data.n_events();
    let n_cens = data.len() - n_events;
    if n_events < v || n_cens < v {
        return Err(Error::invalid(format!(
            "stratified folding needs at least {v} events and {v} censored subjects, \
             got {n_events} events and {n_cens} censored"
        )));
    }
    let mut events: Vec<usize> = Vec::with_capacity(n_events);
    let mut censored: Vec<usize> = Vec::with_capacity(n_cens);
    for (i, s) in data.subjects.iter().enumerate() {
        if s.event {
            events.push(i);
        } else {
            censored.push(i);
        }
    }
    let mut rng = streams::stream(seed, &[tags::FOLDS]);
    events.shuffle(&mut rng);
    censored.shuffle(&mut rng);
    let mut fold_of = vec![0usize; data.len()];
    for (k, &i) in events.iter().enumerate() {
        fold_of[i] = k % v;
    }
    for (k, &i) in censored.iter().enumerate() {
        fold_of[i] = k % v;
    }
    Ok(FoldAssignment { v, fold_of, seed })
}

/// Truncates a subject's outcome to the window (t, t+dt]:
/// `T̃ = min(T, t+dt)` and `δ̃ = δ·1(t < T ≤ t+dt)`.
pub fn interval_outcome(record: &SubjectRecord, t: f64, dt: f64) -> Result<(f64, bool)> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("window width must be positive, got {dt}")));
    }
    if !record.at_risk(t) {
        return Err(Error::invalid(format!(
            "subject {} is not at risk at t={t} (observed time {})",
            record.id, record.obs_time
        )));
    }
    let t_tilde = record.obs_time.min(t + dt);
    let d_tilde = record.event && record.obs_time <= t + dt;
    Ok((t_tilde, d_tilde))
}
