//! Declarative model specification: trajectory basis, functional forms,
//! baseline-hazard spline configuration, and prior hyperparameters.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::spline::SplineBasis;
use serde::{Deserialize, Serialize};

/// Time basis of the subject-specific longitudinal trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrajectoryBasis {
    /// η(t) = (β₀+b₀) + (β₁+b₁)t (+ covariate terms).
    Linear,
    /// B-spline basis with subject-specific coefficients.
    Spline {
        degree: usize,
        interior_knots: Vec<f64>,
        boundary: (f64, f64),
    },
}

impl TrajectoryBasis {
    /// Number of basis columns (= random-effects dimension).
    pub fn dim(&self) -> Result<usize> {
        match self {
            TrajectoryBasis::Linear => Ok(2),
            TrajectoryBasis::Spline { .. } => Ok(self.build()?.num_basis()),
        }
    }

    /// Builds the spline basis (errors for the linear case).
    pub fn build(&self) -> Result<SplineBasis> {
        match self {
            TrajectoryBasis::Linear => Err(Error::invalid(
                "linear trajectory basis has no spline representation",
            )),
            TrajectoryBasis::Spline {
                degree,
                interior_knots,
                boundary,
            } => SplineBasis::new(*degree, interior_knots, *boundary),
        }
    }

    pub fn differentiable(&self) -> bool {
        match self {
            TrajectoryBasis::Linear => true,
            TrajectoryBasis::Spline { degree, .. } => *degree >= 1,
        }
    }
}

/// One functional form linking the trajectory to the log-hazard. Each form
/// carries its own association coefficient(s): one α for value/slope/area,
/// one per random effect for the random-effects form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionalForm {
    /// α·η(t)
    Value,
    /// α·η′(t)
    Slope,
    /// α·(1/v)∫_{t−v}^t η(s) ds; `v: None` means the window is (0, t).
    /// The window is truncated at 0 and averaged over its actual width;
    /// at t = 0 the limit η(0) is used.
    Area { v: Option<f64> },
    /// αᵀ b_i
    RandomEffects,
}

impl FunctionalForm {
    /// Number of association coefficients this form consumes, given the
    /// random-effects dimension `q`.
    pub fn alpha_len(&self, q: usize) -> usize {
        match self {
            FunctionalForm::RandomEffects => q,
            _ => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FunctionalForm::Value => "value",
            FunctionalForm::Slope => "slope",
            FunctionalForm::Area { .. } => "area",
            FunctionalForm::RandomEffects => "random-effects",
        }
    }
}

/// Baseline log-hazard spline configuration; knots are placed from the
/// training data when the model frame is resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub degree: usize,
    pub interior_knots: usize,
    pub penalty_order: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            interior_knots: 5,
            penalty_order: 2,
        }
    }
}

/// Prior hyperparameters. All must be positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    /// Normal sd for each fixed effect β.
    pub beta_sd: f64,
    /// Normal sd for each hazard covariate coefficient γ.
    pub gamma_sd: f64,
    /// Normal sd for each association coefficient α.
    pub alpha_sd: f64,
    /// Normal sd for the null-space (unpenalized) part of γ_h0.
    pub gamma_h0_null_sd: f64,
    /// Inverse-Gamma shape/rate on σ².
    pub sigma2_shape: f64,
    pub sigma2_rate: f64,
    /// Inverse-Gamma shape/rate on the diagonal variances of D.
    pub d_var_shape: f64,
    pub d_var_rate: f64,
    /// LKJ shape for the correlation matrix of D.
    pub lkj_eta: f64,
    /// Gamma shape/rate hyper-prior for the smoothing parameter τ.
    pub tau_shape: f64,
    pub tau_rate: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            beta_sd: 10.0,
            gamma_sd: 10.0,
            alpha_sd: 10.0,
            gamma_h0_null_sd: 10.0,
            sigma2_shape: 0.1,
            sigma2_rate: 0.1,
            d_var_shape: 0.1,
            d_var_rate: 0.1,
            lkj_eta: 1.5,
            tau_shape: 5.0,
            tau_rate: 0.05,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("beta_sd", self.beta_sd),
            ("gamma_sd", self.gamma_sd),
            ("alpha_sd", self.alpha_sd),
            ("gamma_h0_null_sd", self.gamma_h0_null_sd),
            ("sigma2_shape", self.sigma2_shape),
            ("sigma2_rate", self.sigma2_rate),
            ("d_var_shape", self.d_var_shape),
            ("d_var_rate", self.d_var_rate),
            ("lkj_eta", self.lkj_eta),
            ("tau_shape", self.tau_shape),
            ("tau_rate", self.tau_rate),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "prior hyperparameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A complete joint-model specification (priors are passed separately to the
/// fitting routine).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModelSpec {
    pub name: String,
    pub trajectory: TrajectoryBasis,
    /// Labels of baseline covariates entering the longitudinal mean.
    #[serde(default)]
    pub long_covariates: Vec<String>,
    /// Functional forms; an empty list means f ≡ 0 (no association).
    #[serde(default)]
    pub forms: Vec<FunctionalForm>,
    /// Labels of baseline covariates entering the log-hazard.
    #[serde(default)]
    pub hazard_covariates: Vec<String>,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

impl JointModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::invalid("model name must be non-empty"));
        }
        if let TrajectoryBasis::Spline { .. } = &self.trajectory {
            self.trajectory.build()?;
        }
        let mut re_seen = false;
        for form in &self.forms {
            match form {
                FunctionalForm::Slope => {
                    if !self.trajectory.differentiable() {
                        return Err(Error::invalid(format!(
                            "model {:?}: the slope form requires a differentiable \
                             trajectory basis",
                            self.name
                        )));
                    }
                }
                FunctionalForm::Area { v: Some(v) } => {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(Error::invalid(format!(
                            "model {:?}: area window must be positive, got {v}",
                            self.name
                        )));
                    }
                }
                FunctionalForm::RandomEffects => {
                    if re_seen {
                        return Err(Error::invalid(format!(
                            "model {:?}: at most one random-effects form",
                            self.name
                        )));
                    }
                    re_seen = true;
                }
                _ => {}
            }
        }
        if self.baseline.penalty_order < 1 {
            return Err(Error::invalid("baseline penalty order must be ≥ 1"));
        }
        let p = self.baseline.degree + self.baseline.interior_knots + 1;
        if p <= self.baseline.penalty_order {
            return Err(Error::invalid(format!(
                "baseline spline has {p} coefficients, not more than the penalty \
                 order {}",
                self.baseline.penalty_order
            )));
        }
        Ok(())
    }

    /// Random-effects dimension.
    pub fn q(&self) -> Result<usize> {
        self.trajectory.dim()
    }

    /// Total length of the association coefficient vector α.
    pub fn alpha_len(&self) -> Result<usize> {
        let q = self.q()?;
        Ok(self.forms.iter().map(|f| f.alpha_len(q)).sum())
    }
}

/// Places `k` interior knots for the baseline-hazard spline at quantiles of
/// the observed event times (falling back to all observed times when there
/// are too few events), strictly inside (0, boundary_hi).
pub fn baseline_interior_knots(data: &Dataset, k: usize, boundary_hi: f64) -> Vec<f64> {
    if k == 0 {
        return vec![];
    }
    let mut source: Vec<f64> = data
        .subjects
        .iter()
        .filter(|s| s.event)
        .map(|s| s.obs_time)
        .collect();
    if source.len() < k + 2 {
        source = data.subjects.iter().map(|s| s.obs_time).collect();
    }
    source.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let eps = boundary_hi * 1e-6;
    let mut knots: Vec<f64> = Vec::with_capacity(k);
    for i in 1..=k {
        let p = i as f64 / (k + 1) as f64;
        // Type-7 quantile.
        let h = p * (source.len() - 1) as f64;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        let q = if lo + 1 < source.len() {
            source[lo] * (1.0 - frac) + source[lo + 1] * frac
        } else {
            source[lo]
        };
        knots.push(q.clamp(eps, boundary_hi - eps));
    }
    // Enforce strict increase; degenerate quantiles fall back to an even grid.
    let mut ok = true;
    for w in knots.windows(2) {
        if w[1] - w[0] < eps {
            ok = false;
            break;
        }
    }
    if !ok {
        knots = (1..=k)
            .map(|i| boundary_hi * i as f64 / (k + 1) as f64)
            .collect();
    }
    knots
}
