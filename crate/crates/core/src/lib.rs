//! Desk-scale laboratory for estimating quarantine effects on contact networks.
//!
//! The crate simulates epidemics with behaviour-driven quarantine on synthetic
//! social networks, then re-estimates the counterfactual infection rate under
//! stochastic quarantine policies from the confounded observational records.
//! Pipeline, bottom to top:
//!
//! * [`graph`] — temporal network generators and neighborhood summaries
//! * [`sim`] — susceptible/infectious/recovered dynamics, quarantine waves,
//!   observational panels, policy sampling, and ground truth
//! * [`glm`] — iteratively reweighted least squares for the benchmark models
//! * [`deepnet`] — adversarially trained multilayer perceptron outcome model
//! * [`tmle`] — the five-step targeted estimator producing point estimates,
//!   fluctuation parameters, variances, and confidence intervals
//! * [`metrics`] — repeat-level bias / spread / coverage summaries
//!
//! All numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below pin the double-precision instantiations the pipeline uses.

pub mod deepnet;
pub mod design;
pub mod error;
pub mod glm;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod scalar;
pub mod seed;
pub mod sim;
pub mod tmle;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision design/response matrix.
pub type Matrix64 = linalg::Matrix<f64>;
/// Double-precision fitted generalized linear model.
pub type GlmFit64 = glm::GlmFit<f64>;
/// Double-precision network parameters.
pub type MlpParams64 = deepnet::MlpParams<f64>;
