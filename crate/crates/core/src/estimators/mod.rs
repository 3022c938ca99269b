//! Monte-Carlo estimators built on predictive resampling.
//!
//! The posterior hallucination rate of a query `x` given context `D_n` is
//! estimated by repeatedly extending `D_n` with imagined examples drawn from
//! the model itself, then measuring how often a fresh response under `D_n`
//! falls below the ε-quantile of log-probabilities under the extended
//! context. The same resampling loop yields the aleatoric part of the
//! predictive entropy, and their difference from the total entropy gives the
//! epistemic part (mutual information).

mod entropy;
mod quantile;
mod rates;

pub use entropy::{
    estimate_aleatoric_entropy, estimate_mutual_information, estimate_predictive_entropy,
    MutualInformation,
};
pub use quantile::{empirical_quantile, quantile_rank};
pub use rates::{
    estimate_error_rate, estimate_mhr, estimate_phr, estimate_thr, sample_imagined_context,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgm::CgmError;
use crate::scalar::{self, Scalar};
use crate::stream::{StreamKey, StreamRng};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("no quantile samples")]
    NoQuantileSamples,
    #[error("non-finite quantile sample (NaN)")]
    NanSample,
    #[error("invalid estimator config: {0}")]
    InvalidConfig(String),
    #[error("sampling imagined example {index}: {source}")]
    Imagine {
        index: usize,
        #[source]
        source: CgmError,
    },
    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<EstimateError>,
    },
    #[error(transparent)]
    Cgm(#[from] CgmError),
}

/// Monte-Carlo budgets and the ε of the likely sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Miscoverage level of the likely sets, in `(0, 1)`.
    pub epsilon: f64,
    /// Number of imagined contexts (M).
    pub num_contexts: usize,
    /// Number of response samples per quantile / frequency loop (K).
    pub num_samples: usize,
    /// Number of imagined examples appended to the context (N - n).
    pub extend_by: usize,
    #[serde(default)]
    pub seed: u64,
}

impl EstimatorConfig {
    /// Budgets used for synthetic regression tasks: N - n = 100, M = 40, K = 2000.
    pub fn regression() -> Self {
        Self {
            epsilon: 0.05,
            num_contexts: 40,
            num_samples: 2000,
            extend_by: 100,
            seed: 0,
        }
    }

    /// Budgets used with language models: N - n = 5, M = 10, K = 50.
    pub fn language() -> Self {
        Self {
            epsilon: 0.05,
            num_contexts: 10,
            num_samples: 50,
            extend_by: 5,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(EstimateError::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.num_contexts == 0 {
            return Err(EstimateError::InvalidConfig(
                "num_contexts (M) must be at least 1".into(),
            ));
        }
        if self.num_samples == 0 {
            return Err(EstimateError::InvalidConfig(
                "num_samples (K) must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn stream_key(&self) -> StreamKey {
        StreamKey::new(self.seed)
    }

    /// Stream for replicate `j` of the resampling loops.
    pub fn replicate_rng(&self, j: usize) -> StreamRng {
        self.stream_key().child(j as u64).rng()
    }

    /// Stream used for the total predictive entropy inside
    /// [`estimate_mutual_information`].
    pub fn predictive_rng(&self) -> StreamRng {
        self.stream_key().child(u64::MAX).rng()
    }
}

/// Mean of per-replicate values with its Monte-Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate<T> {
    pub value: T,
    pub per_replicate: Vec<T>,
    /// Sample standard deviation of `per_replicate` divided by `sqrt(len)`.
    pub std_error: T,
}

impl<T: Scalar> RateEstimate<T> {
    pub fn from_replicates(per_replicate: Vec<T>) -> Self {
        let value = scalar::mean(&per_replicate);
        let std_error = if per_replicate.is_empty() {
            T::zero()
        } else {
            scalar::sample_std(&per_replicate) / T::from_count(per_replicate.len()).sqrt()
        };
        Self {
            value,
            per_replicate,
            std_error,
        }
    }

    pub fn replicates(&self) -> usize {
        self.per_replicate.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        assert!(EstimatorConfig::regression().validate().is_ok());
        assert!(EstimatorConfig::language().validate().is_ok());
        let bad = EstimatorConfig::language().with_epsilon(1.0);
        assert!(matches!(bad.validate(), Err(EstimateError::InvalidConfig(_))));
        let mut zero_m = EstimatorConfig::language();
        zero_m.num_contexts = 0;
        assert!(zero_m.validate().is_err());
    }

    #[test]
    fn estimate_aggregates_in_order() {
        let est = RateEstimate::from_replicates(vec![0.1f64, 0.2, 0.3, 0.4]);
        assert_eq!(est.value, (((0.1 + 0.2) + 0.3) + 0.4) / 4.0);
        let sd = (((0.15f64 * 0.15 + 0.05 * 0.05) * 2.0) / 3.0).sqrt();
        assert!((est.std_error - sd / 2.0).abs() < 1e-15);
        let single = RateEstimate::from_replicates(vec![0.5f32]);
        assert_eq!(single.std_error, 0.0);
    }
}
