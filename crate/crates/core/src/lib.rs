//! GP-LinCC: Bayesian estimation of a calibration function θ(λ) between two
//! chained numerical models.
//!
//! The second model is linearized in θ at each design point λ_j, which makes
//! the posterior over θ(λ_1..m) Gaussian in closed form once θ(·) carries a
//! Gaussian-process prior. Predictions at new λ follow by GP conditioning.

pub mod benchmarks;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod hyper;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod linearization;
pub mod optimize;
pub mod pipeline;
pub mod posterior;
pub mod predictive;
pub mod runner;

pub use design::{lhs_uniform, sample_iid, DesignSet, LambdaDistribution};
pub use error::{Error, Result};
pub use hyper::{fit_hyperparameters, neg_log_marginal, profile_beta, ComponentParams, FitResult, HyperParams, OptimizerConfig};
pub use kernel::{build_prior_cov, cross_cov, kernel_matrix, matern52, ComponentKernel, Layout};
pub use linearization::{
    assemble_calibration_matrices, fit_linear_coefficients, CalibrationMatrices, GlsData, LinearizedModel, ObservationSet,
    SimulationBundle, SimulationRecord,
};
pub use posterior::{build_prior, posterior_theta, GaussianDist, Posterior, Prior, TrendModel};
pub use predictive::{predict, predict_marginal, target_gp, target_jeffreys, PredictiveTheta};
