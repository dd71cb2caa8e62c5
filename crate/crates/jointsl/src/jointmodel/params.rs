//! Parameter vector θ and the unconstrained parameterization of the
//! random-effects covariance D (log-radii + spherical correlation angles).

use crate::error::{Error, Result};
use crate::jointmodel::spec::PriorSpec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Random-effects covariance expressed through its Cholesky factor in
/// spherical coordinates: D = L Lᵀ with L = diag(exp ψ)·Lc, where Lc is the
/// correlation Cholesky factor built from angles φ ∈ (0, π).
///
/// Row j of Lc (0-indexed): Lc[j,k] = cos φ_{jk} Π_{m<k} sin φ_{jm} for k<j
/// and Lc[j,j] = Π_{m<j} sin φ_{jm}. Angles are stored row-major for the
/// strict lower triangle: (1,0), (2,0), (2,1), (3,0), ...
#[derive(Debug, Clone, PartialEq)]
pub struct DParam {
    pub log_radii: Vec<f64>,
    pub angles: Vec<f64>,
}

impl DParam {
    pub fn identity(q: usize) -> Self {
        Self {
            log_radii: vec![0.0; q],
            angles: vec![std::f64::consts::FRAC_PI_2; q * (q - 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.log_radii.len()
    }

    fn angle(&self, j: usize, k: usize) -> f64 {
        debug_assert!(k < j);
        self.angles[j * (j - 1) / 2 + k]
    }

    /// Correlation Cholesky factor Lc (lower triangular, unit rows).
    pub fn corr_cholesky(&self) -> DMatrix<f64> {
        let q = self.dim();
        let mut lc = DMatrix::zeros(q, q);
        lc[(0, 0)] = 1.0;
        for j in 1..q {
            let mut sin_prod = 1.0;
            for k in 0..j {
                let phi = self.angle(j, k);
                lc[(j, k)] = phi.cos() * sin_prod;
                sin_prod *= phi.sin();
            }
            lc[(j, j)] = sin_prod;
        }
        lc
    }

    /// Cholesky factor of D itself.
    pub fn cov_cholesky(&self) -> DMatrix<f64> {
        let mut l = self.corr_cholesky();
        for j in 0..self.dim() {
            let s = self.log_radii[j].exp();
            for k in 0..=j {
                l[(j, k)] *= s;
            }
        }
        l
    }

    /// The covariance matrix D.
    pub fn cov(&self) -> DMatrix<f64> {
        let l = self.cov_cholesky();
        &l * l.transpose()
    }

    /// Recovers the parameterization from an SPD covariance matrix.
    pub fn from_cov(cov: &DMatrix<f64>) -> Result<Self> {
        let q = cov.nrows();
        if q == 0 || cov.ncols() != q {
            return Err(Error::invalid("covariance must be square and non-empty"));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numerical("covariance matrix is not positive-definite"))?;
        let l = chol.l();
        let mut log_radii = Vec::with_capacity(q);
        let mut angles = Vec::with_capacity(q * (q - 1) / 2);
        for j in 0..q {
            let norm: f64 = (0..=j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>().sqrt();
            log_radii.push(norm.ln());
            let mut sin_prod = 1.0f64;
            for k in 0..j {
                let c = (l[(j, k)] / (norm * sin_prod)).clamp(-1.0, 1.0);
                let phi = c.acos().clamp(1e-9, std::f64::consts::PI - 1e-9);
                angles.push(phi);
                sin_prod *= phi.sin();
            }
        }
        Ok(Self { log_radii, angles })
    }

    /// Log-prior of D in the (ψ, φ) parameterization: inverse-Gamma on the
    /// diagonal variances (with the variance→ψ Jacobian), LKJ(η) on the
    /// correlation matrix, and the φ→R change-of-variables Jacobian.
    pub fn log_prior(&self, priors: &PriorSpec) -> f64 {
        let q = self.dim();
        let (a, b) = (priors.d_var_shape, priors.d_var_rate);
        let mut lp = 0.0;
        for &psi in &self.log_radii {
            let v = (2.0 * psi).exp();
            // IG(a, b) log-density at v, plus |dv/dψ| = 2v.
            lp += -(a + 1.0) * v.ln() - b / v + (2.0f64).ln() + 2.0 * psi;
        }
        // det R = Π_j Π_{m<j} sin²φ_{jm}; LKJ kernel is det R^{η−1}.
        let eta = priors.lkj_eta;
        for j in 1..q {
            for m in 0..j {
                lp += (eta - 1.0) * 2.0 * self.angle(j, m).sin().ln();
            }
        }
        lp + self.log_jacobian_angles()
    }

    /// log |∂R/∂φ| of the spherical map: the Jacobian is block-triangular
    /// over rows, and within row j triangular over k, giving
    /// Σ_{j≥1} Σ_{k<j} [log Lc_{kk} + log sin φ_{jk} + Σ_{l<k} log sin φ_{jl}].
    pub fn log_jacobian_angles(&self) -> f64 {
        let q = self.dim();
        let lc = self.corr_cholesky();
        let mut lj = 0.0;
        for j in 1..q {
            let mut sin_sum = 0.0; // Σ_{l<k} log sin φ_{jl}
            for k in 0..j {
                lj += lc[(k, k)].ln() + self.angle(j, k).sin().ln() + sin_sum;
                sin_sum += self.angle(j, k).sin().ln();
            }
        }
        lj
    }
}

/// The full parameter vector θ in sampling coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub beta: DVector<f64>,
    pub log_sigma: f64,
    pub gamma_h0: DVector<f64>,
    pub gamma: DVector<f64>,
    pub alpha: DVector<f64>,
    pub d: DParam,
    pub tau: f64,
}

impl Params {
    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = self.beta.iter().all(|v| v.is_finite())
            && self.log_sigma.is_finite()
            && self.gamma_h0.iter().all(|v| v.is_finite())
            && self.gamma.iter().all(|v| v.is_finite())
            && self.alpha.iter().all(|v| v.is_finite())
            && self.d.log_radii.iter().all(|v| v.is_finite())
            && self.d.angles.iter().all(|v| v.is_finite())
            && self.tau.is_finite();
        if !all_finite {
            return Err(Error::invalid("parameter vector contains non-finite entries"));
        }
        if self.tau <= 0.0 {
            return Err(Error::invalid("smoothing parameter τ must be positive"));
        }
        Ok(())
    }

    /// Flat snapshot for storage.
    pub fn to_draw(&self) -> ThetaDraw {
        let d = self.d.cov();
        ThetaDraw {
            beta: self.beta.iter().cloned().collect(),
            sigma: self.sigma(),
            gamma_h0: self.gamma_h0.iter().cloned().collect(),
            gamma: self.gamma.iter().cloned().collect(),
            alpha: self.alpha.iter().cloned().collect(),
            d: d.iter().cloned().collect(), // column-major = row-major (symmetric)
            tau: self.tau,
        }
    }
}

/// One stored posterior draw of θ, in natural (constrained) coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaDraw {
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub gamma_h0: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Random-effects covariance, dense q×q (symmetric).
    pub d: Vec<f64>,
    pub tau: f64,
}

impl ThetaDraw {
    pub fn q(&self) -> usize {
        (self.d.len() as f64).sqrt().round() as usize
    }

    pub fn d_matrix(&self) -> DMatrix<f64> {
        let q = self.q();
        DMatrix::from_row_slice(q, q, &self.d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("stored draw has non-positive σ"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("stored draw has non-positive τ"));
        }
        let q = self.q();
        if q * q != self.d.len() {
            return Err(Error::invalid("stored D is not square"));
        }
        self.d_matrix()
            .cholesky()
            .ok_or_else(|| Error::invalid("stored D is not positive-definite"))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spherical_round_trip() {
        // A full covariance with correlations round-trips through (ψ, φ).
        let cov = DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.6, -0.3, 0.6, 1.5, 0.4, -0.3, 0.4, 0.9],
        );
        let p = DParam::from_cov(&cov).unwrap();
        let back = p.cov();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(back[(i, j)], cov[(i, j)], epsilon = 1e-10);
            }
        }
        // All angles strictly inside (0, π).
        for &phi in &p.angles {
            assert!(phi > 0.0 && phi < std::f64::consts::PI);
        }
    }

    #[test]
    fn identity_parameterization() {
        let p = DParam::identity(4);
        let cov = p.cov();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(cov[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bivariate_jacobian_matches_closed_form() {
        // q=2: R offdiagonal r = cos φ, so |dr/dφ| = sin φ.
        let p = DParam {
            log_radii: vec![0.0, 0.0],
            angles: vec![1.1],
        };
        assert_abs_diff_eq!(
            p.log_jacobian_angles(),
            (1.1f64).sin().ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn trivariate_jacobian_matches_finite_differences() {
        // Numerical determinant of ∂(r21, r31, r32)/∂(φ...) at a generic point.
        let angles = vec![0.9, 1.3, 0.7];
        let free_corrs = |a: &[f64]| -> Vec<f64> {
            let p = DParam {
                log_radii: vec![0.0; 3],
                angles: a.to_vec(),
            };
            let r = p.cov();
            vec![r[(1, 0)], r[(2, 0)], r[(2, 1)]]
        };
        let h = 1e-6;
        let mut jac = DMatrix::zeros(3, 3);
        for col in 0..3 {
            let mut ap = angles.clone();
            let mut am = angles.clone();
            ap[col] += h;
            am[col] -= h;
            let fp = free_corrs(&ap);
            let fm = free_corrs(&am);
            for row in 0..3 {
                jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        let det = jac.determinant().abs();
        let p = DParam {
            log_radii: vec![0.0; 3],
            angles,
        };
        assert_abs_diff_eq!(p.log_jacobian_angles(), det.ln(), epsilon = 1e-5);
    }

    #[test]
    fn lkj_uniform_case_reduces_to_angle_jacobian() {
        // η=1 makes the LKJ kernel flat: log_prior minus the IG part equals
        // the φ-Jacobian alone.
        let priors = PriorSpec {
            lkj_eta: 1.0,
            ..PriorSpec::default()
        };
        let p = DParam {
            log_radii: vec![0.0, 0.0],
            angles: vec![0.8],
        };
        let ig_part = {
            let (a, b) = (priors.d_var_shape, priors.d_var_rate);
            2.0 * (-(a + 1.0) * 0.0f64 - b / 1.0 + (2.0f64).ln())
        };
        assert_abs_diff_eq!(
            p.log_prior(&priors) - ig_part,
            (0.8f64).sin().ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn theta_draw_round_trip_and_validation() {
        let params = Params {
            beta: DVector::from_vec(vec![2.0, -0.25]),
            log_sigma: (0.35f64).ln(),
            gamma_h0: DVector::from_vec(vec![-3.8; 9]),
            gamma: DVector::zeros(0),
            alpha: DVector::from_vec(vec![0.9]),
            d: DParam::from_cov(&DMatrix::from_row_slice(
                2,
                2,
                &[0.8, -0.05, -0.05, 0.04],
            ))
            .unwrap(),
            tau: 3.0,
        };
        let draw = params.to_draw();
        draw.validate().unwrap();
        assert_abs_diff_eq!(draw.sigma, 0.35, epsilon = 1e-12);
        let d = draw.d_matrix();
        assert_abs_diff_eq!(d[(0, 1)], -0.05, epsilon = 1e-10);
        let json = serde_json::to_string(&draw).unwrap();
        let back: ThetaDraw = serde_json::from_str(&json).unwrap();
        assert_eq!(draw, back);
    }
}
