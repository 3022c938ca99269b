use std::path::PathBuf;
use std::time::Duration;

use phr_core::textprompt::PromptTemplate;
use serde::{Deserialize, Serialize};

use crate::error::LlmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "snake_case")]
pub struct LlmEndpointConfig {
    /// Server root, e.g. `http://localhost:8000`; `/v1/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token. Unset means no
    /// `Authorization` header is sent.
    pub api_key_env: String,
    pub max_concurrent_requests: usize,
    /// Attempts per operation, first try included. Applies to transient HTTP
    /// failures and to unusable generations alike.
    pub retry_budget: usize,
    pub timeout_ms: u64,
    pub backoff_initial_ms: u64,
    pub backoff_max_ms: u64,
    pub label_temperature: f64,
    pub label_top_p: f64,
    pub pair_temperature: f64,
    pub pair_top_p: f64,
    pub pair_max_new_tokens: usize,
    /// Alternatives requested per position when scoring labels.
    pub top_logprobs: usize,
    /// Forward a per-request seed drawn from the caller's RNG.
    pub send_seed: bool,
    pub cache_dir: Option<PathBuf>,
    pub template: PromptTemplate,
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            model: String::new(),
            api_key_env: "PHR_API_KEY".into(),
            max_concurrent_requests: 4,
            retry_budget: 3,
            timeout_ms: 60_000,
            backoff_initial_ms: 250,
            backoff_max_ms: 8_000,
            label_temperature: 1.0,
            label_top_p: 1.0,
            pair_temperature: 1.0,
            pair_top_p: 0.9,
            pair_max_new_tokens: 200,
            top_logprobs: 20,
            send_seed: true,
            cache_dir: None,
            template: PromptTemplate::default(),
        }
    }
}

impl LlmEndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            ..Self::default()
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn completions_url(&self) -> Result<reqwest::Url, LlmError> {
        let base = reqwest::Url::parse(&self.base_url)
            .map_err(|e| LlmError::InvalidConfig(format!("base_url {:?}: {e}", self.base_url)))?;
        if base.cannot_be_a_base() {
            return Err(LlmError::InvalidConfig(format!("base_url {:?} is not absolute", self.base_url)));
        }
        let mut path = base.path().trim_end_matches('/').to_string();
        path.push_str("/v1/completions");
        let mut url = base;
        url.set_path(&path);
        Ok(url)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        self.completions_url()?;
        let bad = |msg: &str| Err(LlmError::InvalidConfig(msg.into()));
        if self.max_concurrent_requests == 0 {
            return bad("max_concurrent_requests must be at least 1");
        }
        if self.retry_budget == 0 {
            return bad("retry_budget must be at least 1");
        }
        if !(self.label_temperature > 0.0 && self.pair_temperature > 0.0) {
            return bad("temperatures must be positive");
        }
        for p in [self.label_top_p, self.pair_top_p] {
            if !(p > 0.0 && p <= 1.0) {
                return bad("top_p must lie in (0, 1]");
            }
        }
        if self.top_logprobs == 0 || self.pair_max_new_tokens == 0 {
            return bad("top_logprobs and pair_max_new_tokens must be positive");
        }
        Ok(())
    }
}
