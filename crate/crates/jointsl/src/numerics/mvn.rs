//! Multivariate normal sampling and density evaluation via Cholesky
//! factorization.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

/// Cholesky factor of an SPD covariance, reusable across draws.
#[derive(Debug, Clone)]
pub struct MvnFactor {
    chol: Cholesky<f64, Dyn>,
    dim: usize,
    log_norm_const: f64,
}

impl MvnFactor {
    /// Factorizes a symmetric positive-definite covariance.
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        if dim == 0 || cov.ncols() != dim {
            return Err(Error::invalid("covariance must be square and non-empty"));
        }
        if cov.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("covariance contains non-finite entries"));
        }
        let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
            Error::numerical("covariance matrix is not positive-definite".to_string())
        })?;
        let log_det: f64 = (0..dim).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
        let log_norm_const =
            -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            chol,
            dim,
            log_norm_const,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lower-triangular factor L with covariance = L Lᵀ.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Draws one sample `mean + L z` with z standard normal.
    pub fn sample(&self, mean: &DVector<f64>, rng: &mut impl Rng) -> DVector<f64> {
        debug_assert_eq!(mean.len(), self.dim);
        let z = DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        mean + self.chol.l_dirty().lower_triangle() * z
    }

    /// Log-density of `x` under N(mean, covariance).
    pub fn logpdf(&self, x: &DVector<f64>, mean: &DVector<f64>) -> f64 {
        let centered = x - mean;
        let solved = self.chol.solve(&centered);
        self.log_norm_const - 0.5 * centered.dot(&solved)
    }
}

/// Draws one multivariate normal sample; convenience wrapper that factorizes
/// the covariance on every call.
pub fn mvn_sample(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut impl Rng,
) -> Result<DVector<f64>> {
    let f = MvnFactor::new(cov)?;
    if mean.len() != f.dim() {
        return Err(Error::invalid(format!(
            "mean length {} does not match covariance dimension {}",
            mean.len(),
            f.dim()
        )));
    }
    Ok(f.sample(mean, rng))
}
