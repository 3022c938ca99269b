//! Exact Bayesian models with closed-form posteriors.
//!
//! Both models implement [`Cgm`](crate::Cgm), so they can be fed to the
//! resampling estimators, and both expose analytic quantities (posterior,
//! predictive, likely sets, hallucination rates, mutual information) used as
//! oracles for those estimators.

mod categorical;
mod linalg;
mod linear;
pub mod normal;

pub use categorical::{exact_log_prob_quantile, hallucination_mass, DirichletCategoricalModel};
pub use linear::{
    ConjugateLinearModel, LikelyInterval, LinearTruth, PosteriorParams, QueryDistribution,
};

use thiserror::Error;

use crate::cgm::CgmError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConjugateError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in example {index}")]
    NonFinite { index: usize },
    #[error("numerically singular posterior update at example {index}")]
    SingularUpdate { index: usize },
    #[error("unknown label {label} at example {index}")]
    UnknownLabel { index: usize, label: usize },
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("num_samples must be at least 1")]
    NoSamples,
}

impl From<ConjugateError> for CgmError {
    fn from(err: ConjugateError) -> Self {
        CgmError::backend(err)
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), ConjugateError> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(ConjugateError::InvalidEpsilon(epsilon))
    }
}
