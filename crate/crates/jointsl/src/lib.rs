//! Joint models for longitudinal and time-to-event data, dynamic risk
//! prediction, and super-learner ensembling.
//!
//! The crate fits a configurable library of Bayesian joint models by
//! Metropolis-within-Gibbs MCMC, computes cross-validated dynamic risk
//! predictions by Monte Carlo, scores them with proper scoring rules
//! (IPCW and model-based Brier, integrated Brier, expected predictive
//! cross-entropy), and combines the library by super learning: convex,
//! time-interval-specific weights minimizing the cross-validated score.
//!
//! Modules, bottom to top:
//! - [`numerics`]: B-splines, quadrature, root finding, penalties, simplex
//!   optimization, multivariate normals.
//! - [`data`]: subjects, datasets, folds, risk sets.
//! - [`simulate`]: synthetic data generators and censoring calibration.
//! - [`jointmodel`]: model specification, likelihood, MCMC.
//! - [`dynpred`]: Monte Carlo dynamic predictions.
//! - [`scoring`]: Brier/IBS/EPCE estimators with censoring handling.
//! - [`superlearn`]: cross-validation orchestration and weight optimization.
//! - [`cli`]: file formats, persistence, and the command-line pipeline.
//!
//! Everything is deterministic given the user-facing seed: random streams
//! are derived per task (see [`streams`]), parallel results are merged in
//! index order, and no output embeds wall-clock time.

pub mod cli;
pub mod data;
pub mod dynpred;
pub mod error;
pub mod jointmodel;
pub mod numerics;
pub mod scoring;
pub mod simulate;
pub mod streams;
pub mod superlearn;

pub use error::{Error, Result};

/// Version string embedded in every output artifact.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
