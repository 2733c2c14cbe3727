//! Estimation of the regression parameter in current status linear
//! regression: nonparametric MLE of the error law, kernel-smoothed
//! estimators, score-based estimators of beta and the intercept, population
//! quantities under a known model, and Monte Carlo drivers.

pub mod error;
pub mod estimate;
pub mod experiments;
pub mod io;
pub mod isotonic;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod score;

pub use error::{Error, Result};
pub use isotonic::{mle_fixed_beta, StepDistribution};
pub use kernel::{KernelConfig, PluginEstimator, Triweight};
pub use model::{ModelSpec, Observation, Sample, TruncationSpec};
pub use estimate::{estimate, EstimateOptions, EstimateResult, Method};
