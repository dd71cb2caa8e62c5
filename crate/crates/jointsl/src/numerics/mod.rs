//! Self-contained numerical kernels: B-splines, Gauss–Legendre quadrature,
//! Brent root finding, difference-penalty matrices, simplex-constrained
//! minimization, and multivariate normal sampling.
//!
//! Everything here is a pure function of its inputs (plus an explicitly
//! passed random generator where sampling is involved), so the kernels are
//! safe to call from worker threads.

pub mod mvn;
pub mod optim;
pub mod penalty;
pub mod quad;
pub mod root;
pub mod spline;

pub use mvn::{mvn_sample, MvnFactor};
pub use optim::{log_sum_exp, nelder_mead_min, softmax, NelderMeadResult};
pub use penalty::{difference_matrix, penalty_matrix, PenaltyMatrix};
pub use quad::{gauss_legendre15, hazard_panels, GaussLegendre};
pub use root::{brent_root, expand_bracket_upper};
pub use spline::{dot, SplineBasis};
