//! Resolved model frame: bases bound to training data, covariate label
//! resolution, and cached per-subject design structures for likelihood
//! evaluation and quadrature.

use crate::data::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::jointmodel::spec::{
    baseline_interior_knots, FunctionalForm, JointModelSpec, TrajectoryBasis,
};
use crate::numerics::penalty::{penalty_matrix, PenaltyMatrix};
use crate::numerics::quad::{hazard_panels, GaussLegendre};
use crate::numerics::spline::{dot, SplineBasis};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicBool, Ordering};

/// Data-dependent frame pieces, serialized with the fit so predictions on
/// new data reuse the training-time bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedBases {
    pub baseline_interior: Vec<f64>,
    pub baseline_boundary: (f64, f64),
    /// Follow-up range used to decide quadrature panel counts.
    pub follow_up_range: f64,
}

/// A model specification resolved against a dataset: concrete spline bases,
/// covariate indices, and the baseline penalty.
#[derive(Debug)]
pub struct ModelFrame {
    pub spec: JointModelSpec,
    pub resolved: ResolvedBases,
    pub baseline: SplineBasis,
    pub penalty: PenaltyMatrix,
    trajectory: Option<SplineBasis>,
    pub long_cov_idx: Vec<usize>,
    pub haz_cov_idx: Vec<usize>,
    /// (offset, length) of each form's slice in α.
    pub alpha_spans: Vec<(usize, usize)>,
    clamp_warned: AtomicBool,
}

impl Clone for ModelFrame {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            resolved: self.resolved.clone(),
            baseline: self.baseline.clone(),
            penalty: self.penalty.clone(),
            trajectory: self.trajectory.clone(),
            long_cov_idx: self.long_cov_idx.clone(),
            haz_cov_idx: self.haz_cov_idx.clone(),
            alpha_spans: self.alpha_spans.clone(),
            clamp_warned: AtomicBool::new(self.clamp_warned.load(Ordering::Relaxed)),
        }
    }
}

fn resolve_labels(labels: &[String], names: &[String]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            names.iter().position(|n| n == l).ok_or_else(|| {
                Error::invalid(format!(
                    "covariate {l:?} not present in the dataset (available: {names:?})"
                ))
            })
        })
        .collect()
}

impl ModelFrame {
    /// Resolves `spec` against training data: baseline knots from event-time
    /// quantiles on (0, max observed time), covariate labels to indices.
    pub fn new(spec: &JointModelSpec, data: &Dataset) -> Result<Self> {
        spec.validate()?;
        data.validate()?;
        let hi = data.max_obs_time();
        let interior = baseline_interior_knots(data, spec.baseline.interior_knots, hi);
        let resolved = ResolvedBases {
            baseline_interior: interior,
            baseline_boundary: (0.0, hi),
            follow_up_range: hi,
        };
        Self::from_resolved(spec, &resolved, &data.covariate_names)
    }

    /// Rebuilds a frame from stored resolution info (e.g. out of an archive).
    pub fn from_resolved(
        spec: &JointModelSpec,
        resolved: &ResolvedBases,
        covariate_names: &[String],
    ) -> Result<Self> {
        spec.validate()?;
        let baseline = SplineBasis::new(
            spec.baseline.degree,
            &resolved.baseline_interior,
            resolved.baseline_boundary,
        )?;
        let penalty = penalty_matrix(baseline.num_basis(), spec.baseline.penalty_order)?;
        let trajectory = match &spec.trajectory {
            TrajectoryBasis::Linear => None,
            TrajectoryBasis::Spline { .. } => Some(spec.trajectory.build()?),
        };
        let long_cov_idx = resolve_labels(&spec.long_covariates, covariate_names)?;
        let haz_cov_idx = resolve_labels(&spec.hazard_covariates, covariate_names)?;
        let q = spec.q()?;
        let mut alpha_spans = Vec::with_capacity(spec.forms.len());
        let mut off = 0;
        for f in &spec.forms {
            let len = f.alpha_len(q);
            alpha_spans.push((off, len));
            off += len;
        }
        Ok(Self {
            spec: spec.clone(),
            resolved: resolved.clone(),
            baseline,
            penalty,
            trajectory,
            long_cov_idx,
            haz_cov_idx,
            alpha_spans,
            clamp_warned: AtomicBool::new(false),
        })
    }

    /// Random-effects dimension q.
    pub fn q(&self) -> usize {
        match &self.trajectory {
            None => 2,
            Some(b) => b.num_basis(),
        }
    }

    /// Fixed-effects dimension p (trajectory basis + longitudinal covariates).
    pub fn p(&self) -> usize {
        self.q() + self.long_cov_idx.len()
    }

    pub fn n_gamma(&self) -> usize {
        self.haz_cov_idx.len()
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha_spans.last().map_or(0, |(o, l)| o + l)
    }

    pub fn n_baseline(&self) -> usize {
        self.baseline.num_basis()
    }

    fn warn_clamp(&self, t: f64) {
        if !self.clamp_warned.swap(true, Ordering::Relaxed) {
            log::warn!(
                "trajectory evaluation at t={t} clamped to the spline boundary; \
                 further clamps for this model are silent"
            );
        }
    }

    /// Trajectory basis row z(t) (length q).
    pub fn traj_row(&self, t: f64) -> Vec<f64> {
        match &self.trajectory {
            None => vec![1.0, t],
            Some(b) => {
                if t < b.boundary().0 || t > b.boundary().1 {
                    self.warn_clamp(t);
                }
                b.eval_clamped(t)
            }
        }
    }

    /// Derivative row z′(t).
    pub fn traj_deriv_row(&self, t: f64) -> Vec<f64> {
        match &self.trajectory {
            None => vec![0.0, 1.0],
            Some(b) => b.deriv_clamped(t),
        }
    }

    /// Window-averaged row: (1/|window|)∫ z(s) ds over (max(0, t−v), t);
    /// at t = 0 this is z(0). `v = None` means the (0, t) window.
    pub fn traj_area_row(&self, t: f64, v: Option<f64>) -> Vec<f64> {
        let lo = match v {
            None => 0.0,
            Some(v) => (t - v).max(0.0),
        };
        let width = t - lo;
        if width <= 1e-12 {
            return self.traj_row(t);
        }
        let rule = GaussLegendre::default15();
        let mut acc = vec![0.0; self.q()];
        for (node, w) in rule.mapped(lo, t) {
            let row = self.traj_row(node);
            for (a, r) in acc.iter_mut().zip(&row) {
                *a += w * r;
            }
        }
        for a in &mut acc {
            *a /= width;
        }
        acc
    }

    /// Subject linear predictor η(t) = x(t)ᵀβ + z(t)ᵀb, where x(t) stacks
    /// the trajectory row and the longitudinal covariates.
    pub fn linear_predictor(&self, beta: &[f64], b: &[f64], covs: &[f64], t: f64) -> f64 {
        let z = self.traj_row(t);
        let q = self.q();
        let mut eta = dot(&z, &beta[..q]) + dot(&z, b);
        for (j, &ci) in self.long_cov_idx.iter().enumerate() {
            eta += beta[q + j] * covs[ci];
        }
        eta
    }

    /// Slope η′(t) (covariate terms are constant in t).
    pub fn linear_predictor_slope(&self, beta: &[f64], b: &[f64], t: f64) -> Result<f64> {
        if !self.spec.trajectory.differentiable() {
            return Err(Error::invalid(
                "slope requested for a non-differentiable trajectory basis",
            ));
        }
        let dz = self.traj_deriv_row(t);
        let q = self.q();
        Ok(dot(&dz, &beta[..q]) + dot(&dz, b))
    }

    /// Design rows of one form at time `t`: feature = xᵀβ + zᵀb (linear in
    /// both), except the random-effects form which is handled separately.
    fn form_rows(&self, form: &FunctionalForm, covs: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let q = self.q();
        let (zrow, cov_terms): (Vec<f64>, bool) = match form {
            FunctionalForm::Value => (self.traj_row(t), true),
            FunctionalForm::Slope => (self.traj_deriv_row(t), false),
            FunctionalForm::Area { v } => (self.traj_area_row(t, *v), true),
            FunctionalForm::RandomEffects => (vec![0.0; q], false),
        };
        let mut xrow = vec![0.0; self.p()];
        xrow[..q].copy_from_slice(&zrow);
        if cov_terms {
            for (j, &ci) in self.long_cov_idx.iter().enumerate() {
                xrow[q + j] = covs[ci];
            }
        }
        (xrow, zrow)
    }

    /// One hazard evaluation point with all design rows cached.
    pub fn hazard_point(&self, covs: &[f64], t: f64, weight: f64) -> HazardPoint {
        let baseline_row = self.baseline.eval_clamped(t);
        let mut form_x = Vec::with_capacity(self.spec.forms.len());
        let mut form_z = Vec::with_capacity(self.spec.forms.len());
        for form in &self.spec.forms {
            let (x, z) = self.form_rows(form, covs, t);
            form_x.push(x);
            form_z.push(z);
        }
        HazardPoint {
            time: t,
            weight,
            baseline_row,
            form_x,
            form_z,
        }
    }

    /// Gauss–Legendre points for ∫_{a}^{b} h(s) ds with panel count chosen
    /// from the follow-up range.
    pub fn interval_points(&self, covs: &[f64], a: f64, b: f64) -> Result<Vec<HazardPoint>> {
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b) {
            return Err(Error::invalid(format!(
                "hazard integral needs 0 ≤ a ≤ b, got ({a}, {b})"
            )));
        }
        if a == b {
            return Ok(vec![]);
        }
        let panels = hazard_panels(a, b, self.resolved.follow_up_range);
        let rule = GaussLegendre::default15();
        let width = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * rule.order());
        for p in 0..panels {
            let lo = a + p as f64 * width;
            for (node, w) in rule.mapped(lo, lo + width) {
                out.push(self.hazard_point(covs, node, w));
            }
        }
        Ok(out)
    }

    /// Full cached design for one subject.
    pub fn subject_design(&self, rec: &SubjectRecord) -> Result<SubjectDesign> {
        rec.validate()?;
        let q = self.q();
        let p = self.p();
        let n = rec.times.len();
        let mut x_long = vec![0.0; n * p];
        let mut z_long = vec![0.0; n * q];
        for (l, &t) in rec.times.iter().enumerate() {
            let z = self.traj_row(t);
            x_long[l * p..l * p + q].copy_from_slice(&z);
            for (j, &ci) in self.long_cov_idx.iter().enumerate() {
                x_long[l * p + q + j] = rec.covariates[ci];
            }
            z_long[l * q..(l + 1) * q].copy_from_slice(&z);
        }
        let w_haz: Vec<f64> = self.haz_cov_idx.iter().map(|&i| rec.covariates[i]).collect();
        let quad = self.interval_points(&rec.covariates, 0.0, rec.obs_time)?;
        let at_event = if rec.event {
            Some(self.hazard_point(&rec.covariates, rec.obs_time, 0.0))
        } else {
            None
        };
        Ok(SubjectDesign {
            x_long,
            z_long,
            y: rec.values.clone(),
            n_obs: n,
            event: rec.event,
            obs_time: rec.obs_time,
            w_haz,
            quad,
            at_event,
        })
    }
}

/// All design rows needed to evaluate the log-hazard at one time point.
#[derive(Debug, Clone)]
pub struct HazardPoint {
    pub time: f64,
    /// Quadrature weight (0 for points used outside an integral).
    pub weight: f64,
    pub baseline_row: Vec<f64>,
    /// Per form: row on β.
    pub form_x: Vec<Vec<f64>>,
    /// Per form: row on b.
    pub form_z: Vec<Vec<f64>>,
}

/// Cached per-subject design.
#[derive(Debug, Clone)]
pub struct SubjectDesign {
    /// Row-major n×p design of the longitudinal mean fixed part.
    pub x_long: Vec<f64>,
    /// Row-major n×q design of the random part.
    pub z_long: Vec<f64>,
    pub y: Vec<f64>,
    pub n_obs: usize,
    pub event: bool,
    pub obs_time: f64,
    pub w_haz: Vec<f64>,
    /// Quadrature points for Λ(0, obs_time).
    pub quad: Vec<HazardPoint>,
    /// Hazard point at the event time (δ=1 subjects only).
    pub at_event: Option<HazardPoint>,
}
