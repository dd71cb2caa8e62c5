//! Bayesian joint models for a longitudinal outcome and a time-to-event
//! outcome, fit by Metropolis-within-Gibbs MCMC.

pub mod frame;
pub mod init;
pub mod likelihood;
pub mod mcmc;
pub mod params;
pub mod spec;

pub use frame::{ModelFrame, ResolvedBases, SubjectDesign};
pub use likelihood::{cumulative_hazard_points, log_prior, subject_loglik, ThetaView};
pub use mcmc::{fit_mcmc, fit_mcmc_on_frame, ChainMeta, McmcConfig, PosteriorDraws};
pub use params::{DParam, Params, ThetaDraw};
pub use spec::{BaselineConfig, FunctionalForm, JointModelSpec, PriorSpec, TrajectoryBasis};
