use std::path::{Path, PathBuf};

use phr_core::calibration::CalibrationConfig;
use phr_core::conjugate::QueryDistribution;
use phr_core::textprompt::{DatasetFormat, LengthMode};
use phr_core::EstimatorConfig;
use phr_llm::LlmEndpointConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Phr,
    Thr,
    Mhr,
    ErrorRate,
    Mi,
    Calibration,
    OracleCompare,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Phr => "phr",
            Mode::Thr => "thr",
            Mode::Mhr => "mhr",
            Mode::ErrorRate => "error-rate",
            Mode::Mi => "mi",
            Mode::Calibration => "calibration",
            Mode::OracleCompare => "oracle-compare",
        }
    }
}

fn one() -> f64 {
    1.0
}

fn degree_one() -> usize {
    1
}

fn noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    ConjugateLinear {
        #[serde(default = "degree_one")]
        degree: usize,
        #[serde(default = "noise")]
        noise_std: f64,
        #[serde(default = "one")]
        query_std: f64,
        /// Multiplies the identity prior covariance; 0 gives a point mass.
        #[serde(default = "one")]
        prior_scale: f64,
        #[serde(default)]
        query_distribution: QueryDistribution,
    },
    ConjugateCategorical {
        labels: Vec<String>,
        #[serde(default = "one")]
        alpha: f64,
    },
    Llm {
        endpoint: Box<LlmEndpointConfig>,
        dataset: DatasetConfig,
    },
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::ConjugateLinear { .. } => "conjugate-linear",
            ModelConfig::ConjugateCategorical { .. } => "conjugate-categorical",
            ModelConfig::Llm { .. } => "llm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<DatasetFormat>,
    /// `[from, to]` label renames applied after loading.
    #[serde(default)]
    pub relabel: Vec<(String, String)>,
    #[serde(default)]
    pub max_length: Option<usize>,
    #[serde(default = "chars")]
    pub length_mode: LengthMode,
}

fn chars() -> LengthMode {
    LengthMode::Chars
}

/// Calibration budgets; task count and context size come from the
/// experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    pub extend_by: usize,
    pub quantile_samples: usize,
    pub coverage_samples: usize,
    pub q_grid_size: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        let s = CalibrationConfig::standard(1, 0);
        Self {
            extend_by: s.extend_by,
            quantile_samples: s.quantile_samples,
            coverage_samples: s.coverage_samples,
            q_grid_size: s.q_grid_size,
        }
    }
}

fn analytic_samples() -> usize {
    1_000_000
}

fn eval_size() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: ModelConfig,
    /// Its `seed` is replaced by the run seed.
    pub estimator: EstimatorConfig,
    pub context_sizes: Vec<usize>,
    pub num_tasks: usize,
    /// Held-out examples per task for `mhr`.
    #[serde(default = "eval_size")]
    pub eval_size: usize,
    /// Monte Carlo draws of the conjugate oracle in `oracle-compare`.
    #[serde(default = "analytic_samples")]
    pub analytic_samples: usize,
    #[serde(default)]
    pub calibration: CalibrationSettings,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        // Relative dataset paths are relative to the config file.
        if let ModelConfig::Llm { dataset, .. } = &mut config.model {
            if dataset.path.is_relative() {
                if let Some(dir) = path.parent() {
                    dataset.path = dir.join(&dataset.path);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |msg: String| Err(CliError::Validation(msg));
        self.estimator
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if self.num_tasks == 0 {
            return invalid("num_tasks must be at least 1".into());
        }
        if self.context_sizes.is_empty() {
            return invalid("context_sizes must not be empty".into());
        }
        if self.context_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("context_sizes must be strictly ascending".into());
        }
        let model = self.model.name();
        let supported = match self.mode {
            Mode::Phr | Mode::Mi => true,
            Mode::Mhr => !matches!(self.model, ModelConfig::Llm { .. }) || self.eval_size > 0,
            Mode::Thr | Mode::OracleCompare => !matches!(self.model, ModelConfig::Llm { .. }),
            Mode::ErrorRate => !matches!(self.model, ModelConfig::ConjugateLinear { .. }),
            Mode::Calibration => matches!(self.model, ModelConfig::ConjugateLinear { .. }),
        };
        if !supported {
            return invalid(format!("mode {} is not available for model {model}", self.mode.name()));
        }
        if self.mode == Mode::Mhr && self.eval_size == 0 {
            return invalid("mode mhr needs eval_size > 0".into());
        }
        if self.mode == Mode::OracleCompare && self.analytic_samples == 0 {
            return invalid("analytic_samples must be positive".into());
        }
        if let ModelConfig::Llm { endpoint, dataset } = &self.model {
            endpoint
                .validate()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            if dataset.max_length == Some(0) {
                return invalid("dataset.max_length must be at least 1".into());
            }
        }
        Ok(())
    }
}
