//! Posterior hallucination rate (PHR) estimation for in-context learning.
//!
//! The crate is organised around the [`Cgm`] capability: anything that can
//! sample a query/response pair given a context, sample a response for a
//! query, and score a response's log-probability. On top of that sit
//!
//! - [`estimators`]: predictive-resampling Monte-Carlo estimators for the
//!   posterior hallucination rate, the true/model hallucination rates, the
//!   empirical error rate, and the entropy / mutual-information
//!   decomposition of predictive uncertainty;
//! - [`conjugate`]: exact Bayesian models (Gaussian linear regression on a
//!   polynomial basis, Dirichlet-categorical) that implement [`Cgm`] and also
//!   expose closed-form posteriors and brute-force oracles;
//! - [`calibration`]: coverage-based calibration of the resampled predictive;
//! - [`textprompt`]: text datasets and the `Input:` / `Label:` prompt format
//!   used to drive language models.
//!
//! Numeric code is generic over [`Scalar`] (implemented for `f32` and `f64`);
//! the aliases at the crate root fix the scalar to `f64`.

pub mod calibration;
pub mod cgm;
pub mod conjugate;
pub mod data;
pub mod estimators;
pub mod scalar;
pub mod stream;
pub mod textprompt;

pub use cgm::{Cgm, CgmError};
pub use data::{ContextDataset, ExamplePair};
pub use estimators::{EstimateError, EstimatorConfig, RateEstimate};
pub use scalar::Scalar;
pub use stream::{StreamKey, StreamRng};

/// Gaussian linear model over `f64`.
pub type LinearModel = conjugate::ConjugateLinearModel<f64>;
/// Gaussian linear model over `f32`.
pub type LinearModelF32 = conjugate::ConjugateLinearModel<f32>;
/// Dirichlet-categorical model over `f64`.
pub type CategoricalModel = conjugate::DirichletCategoricalModel<f64>;
/// Dirichlet-categorical model over `f32`.
pub type CategoricalModelF32 = conjugate::DirichletCategoricalModel<f32>;
/// Posterior over linear-model coefficients in `f64`.
pub type Posterior = conjugate::PosteriorParams<f64>;
/// Monte-Carlo estimate in `f64`.
pub type Estimate = RateEstimate<f64>;
/// Context of real-valued query/response pairs.
pub type RegressionContext = ContextDataset<f64, f64>;
/// Context of text query/label pairs.
pub type TextContext = ContextDataset<String, String>;
