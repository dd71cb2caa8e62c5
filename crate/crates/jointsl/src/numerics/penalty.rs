//! Difference-penalty matrices for P-spline smoothing.
//!
//! `K = Δ_rᵀ Δ_r` where `Δ_r` is the r-th forward-difference operator on `P`
//! coefficients; `K` is symmetric positive-semidefinite with rank `P − r`
//! and annihilates polynomial coefficient sequences of degree below `r`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// An r-th order difference penalty on a coefficient vector of length `dim`.
#[derive(Debug, Clone)]
pub struct PenaltyMatrix {
    pub order: usize,
    pub dim: usize,
    /// The penalty matrix K = Δ_rᵀ Δ_r.
    pub k: DMatrix<f64>,
    /// Numerical rank of K (singular values above 1e-9 of the largest);
    /// equals `dim − order` by construction.
    pub rank: usize,
    /// Orthonormal basis of the null space of K (columns), i.e. the
    /// unpenalized polynomial directions.
    pub null_basis: DMatrix<f64>,
}

/// The r-th forward-difference operator as a `(P−r) × P` matrix.
pub fn difference_matrix(p: usize, r: usize) -> Result<DMatrix<f64>> {
    if r == 0 || p <= r {
        return Err(Error::invalid(format!(
            "difference order must satisfy P > r >= 1, got P={p}, r={r}"
        )));
    }
    let mut d = DMatrix::<f64>::identity(p, p);
    for step in 0..r {
        let rows = p - step - 1;
        let mut next = DMatrix::<f64>::zeros(rows, p - step);
        for i in 0..rows {
            next[(i, i)] = -1.0;
            next[(i, i + 1)] = 1.0;
        }
        d = next * d;
    }
    Ok(d)
}

/// Builds the penalty matrix, its numerical rank, and its null-space basis.
pub fn penalty_matrix(p: usize, r: usize) -> Result<PenaltyMatrix> {
    let delta = difference_matrix(p, r)?;
    let k = delta.transpose() * &delta;
    // Rank and null space by SVD with a relative 1e-9 threshold.
    let svd = k.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let thresh = 1e-9 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > thresh).count();
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let null_dim = p - rank;
    let mut null_basis = DMatrix::<f64>::zeros(p, null_dim);
    // Singular values are sorted descending; the trailing columns span the
    // null space.
    for (j, col) in (rank..p).enumerate() {
        null_basis.set_column(j, &u.column(col));
    }
    Ok(PenaltyMatrix {
        order: r,
        dim: p,
        k,
        rank,
        null_basis,
    })
}

impl PenaltyMatrix {
    /// Quadratic form γᵀKγ.
    pub fn quad_form(&self, gamma: &[f64]) -> f64 {
        debug_assert_eq!(gamma.len(), self.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in 0..self.dim {
                row = self.k[(i, j)].mul_add(gamma[j], row);
            }
            acc = gamma[i].mul_add(row, acc);
        }
        acc
    }

    /// Squared norm of the projection of γ onto the null space of K
    /// (the unpenalized polynomial component).
    pub fn null_projection_sq(&self, gamma: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.null_basis.ncols() {
            let mut c = 0.0;
            for i in 0..self.dim {
                c = self.null_basis[(i, j)].mul_add(gamma[i], c);
            }
            acc += c * c;
        }
        acc
    }
}
