//! Measurement-error correction for regression on categorized covariates.
//!
//! When a continuous exposure is measured with error and then cut into
//! categories, the usual indicator-variable regression (the "naive" fit) is
//! biased because observations land in the wrong category. This crate
//! estimates the induced misclassification structure from replicate
//! measurements and corrects the naive coefficients by extrapolation:
//!
//! - [`error_model`]: Box-Cox transformation, profile-likelihood estimate of
//!   the transformation exponent, and method-of-moments estimates of the
//!   transformed-scale mean and variances from replicates.
//! - [`misclass`]: closed-form misclassification matrix `Π` and category
//!   probability vector `p` induced by the fitted error model.
//! - [`stochastic_matrix`]: fractional powers `Π^η` and the linear map that
//!   sends true coefficients to naive coefficients.
//! - [`glm`]: no-intercept indicator regressions (identity, logit, probit).
//! - [`simfex`]: the simulation-free extrapolation estimator with bootstrap
//!   inference, plus the contrast variant for a grouped precise covariate.
//! - [`mcsimex`]: the simulation-based comparator with jackknife variance.
//! - [`simulate`]: synthetic data generation and a Monte Carlo study harness.
//! - [`methods`]: the estimators behind one trait, selectable by name.

pub mod dist;
pub mod error;
pub mod error_model;
pub mod glm;
pub mod mcsimex;
pub mod methods;
pub mod misclass;
pub mod quadrature;
pub mod rng;
pub mod simfex;
pub mod simulate;
pub mod stochastic_matrix;

pub use error::{Error, Result};
pub use error_model::{fit_error_params, fit_lambda, BoxCoxParam, ErrorModelParams, ReplicateData};
pub use glm::{build_design, fit, Dataset, FitResult, Link};
pub use mcsimex::{mcsimex_estimate, misclassify, McsimexConfig, McsimexResult};
pub use misclass::{
    estimate_pi_p, estimate_pi_p_by_group, CategoryProbs, CategoryScheme, MisclassModel,
    PiPEstimate, StochasticMatrix,
};
pub use simfex::{
    bootstrap_inference, fit_extrapolant, naive_map, pseudo_sequence, simfex_contrast_estimate,
    simfex_estimate, BootstrapOptions, BootstrapSummary, EtaGrid, Extrapolant, ExtrapolantKind,
    SimfexResult,
};
pub use stochastic_matrix::{fractional_power, naive_map_matrix, MatrixPowerResult};
