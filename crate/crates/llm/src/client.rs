use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;

use crate::cache::ResponseCache;
use crate::config::LlmEndpointConfig;
use crate::error::LlmError;
use crate::wire::{CompletionRequest, CompletionResponse};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredToken {
    pub token: String,
    /// Natural-log probability.
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionParams {
    pub prompt: String,
    pub max_tokens: usize,
    pub temperature: f64,
    pub top_p: f64,
    /// Top-k alternatives per position; `None` sends no `logprobs` field.
    pub logprobs: Option<usize>,
    pub seed: Option<u64>,
    /// Whether an identical request may be answered from the cache. Sampling
    /// requests without a seed must not be.
    pub cacheable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    /// Sampled tokens with their log-probabilities; empty when logprobs were
    /// not requested.
    pub tokens: Vec<ScoredToken>,
    /// Alternatives per position, as returned by the server.
    pub top_logprobs: Vec<BTreeMap<String, f64>>,
    /// HTTP attempts spent on this completion (0 for a cache hit).
    pub attempts: usize,
}

/// Counters shared by every call on one client.
#[derive(Debug, Default)]
pub struct RequestStats {
    requests: AtomicUsize,
    retries: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl RequestStats {
    /// HTTP requests sent, retries included.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn retries(&self) -> usize {
        self.retries.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::Relaxed)
    }
}

/// Admission bound on concurrent requests.
struct Gate {
    in_use: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(limit: usize) -> Self {
        Self {
            in_use: Mutex::new(0),
            freed: Condvar::new(),
            limit,
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_use.lock().expect("gate poisoned");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("gate poisoned");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_use.lock().expect("gate poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

enum Failure {
    Transient { status: Option<u16>, message: String },
    Fatal(LlmError),
}

/// Blocking client for one completion endpoint; safe to share across
/// threads.
pub struct LlmClient {
    config: LlmEndpointConfig,
    url: reqwest::Url,
    http: Client,
    api_key: Option<String>,
    gate: Gate,
    stats: RequestStats,
    cache: Option<ResponseCache>,
}

impl LlmClient {
    /// Reads the API key from `config.api_key_env` at construction.
    pub fn new(config: LlmEndpointConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(config: LlmEndpointConfig, api_key: Option<String>) -> Result<Self, LlmError> {
        config.validate()?;
        let url = config.completions_url()?;
        let http = Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let cache = config.cache_dir.as_ref().map(ResponseCache::open).transpose()?;
        Ok(Self {
            gate: Gate::new(config.max_concurrent_requests),
            config,
            url,
            http,
            api_key,
            stats: RequestStats::default(),
            cache,
        })
    }

    pub fn config(&self) -> &LlmEndpointConfig {
        &self.config
    }

    pub fn stats(&self) -> &RequestStats {
        &self.stats
    }

    pub fn request_body(&self, params: &CompletionParams) -> CompletionRequest {
        CompletionRequest {
            model: self.config.model.clone(),
            prompt: params.prompt.clone(),
            max_tokens: params.max_tokens,
            temperature: params.temperature,
            top_p: params.top_p,
            logprobs: params.logprobs,
            seed: params.seed,
        }
    }

    /// One completion, retrying transient failures (429, 5xx, timeouts,
    /// connection errors) with exponential backoff.
    pub fn complete(&self, params: &CompletionParams) -> Result<Completion, LlmError> {
        let body = self.request_body(params);
        let cache_key = match (&self.cache, params.cacheable) {
            (Some(_), true) => Some(ResponseCache::key(&body)),
            _ => None,
        };
        if let (Some(cache), Some(key)) = (&self.cache, &cache_key) {
            if let Some(resp) = cache.get(key)? {
                self.stats.cache_hits.fetch_add(1, Ordering::Relaxed);
                return read_completion(resp, params.logprobs.is_some(), 0);
            }
        }

        let budget = self.config.retry_budget;
        let mut last = (None, String::new());
        for attempt in 1..=budget {
            if attempt > 1 {
                self.stats.retries.fetch_add(1, Ordering::Relaxed);
                std::thread::sleep(self.backoff(attempt - 1));
            }
            match self.send(&body) {
                Ok(resp) => {
                    if let (Some(cache), Some(key)) = (&self.cache, &cache_key) {
                        cache.put(key, &resp)?;
                    }
                    return read_completion(resp, params.logprobs.is_some(), attempt);
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient { status, message }) => last = (status, message),
            }
        }
        Err(LlmError::RetriesExhausted {
            attempts: budget,
            status: last.0,
            last: last.1,
        })
    }

    fn backoff(&self, retry: usize) -> Duration {
        let factor = 1u64 << (retry - 1).min(20);
        let ms = self
            .config
            .backoff_initial_ms
            .saturating_mul(factor)
            .min(self.config.backoff_max_ms);
        Duration::from_millis(ms)
    }

    fn send(&self, body: &CompletionRequest) -> Result<CompletionResponse, Failure> {
        let _permit = self.gate.acquire();
        self.stats.requests.fetch_add(1, Ordering::Relaxed);
        let mut req = self.http.post(self.url.clone()).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() || e.is_request() {
                Failure::Transient {
                    status: None,
                    message: e.to_string(),
                }
            } else {
                Failure::Fatal(LlmError::Transport(e.to_string()))
            }
        })?;
        let status = resp.status();
        if status.is_success() {
            let text = resp.text().map_err(|e| Failure::Transient {
                status: Some(status.as_u16()),
                message: e.to_string(),
            })?;
            return serde_json::from_str(&text).map_err(|e| Failure::Fatal(LlmError::Malformed(e.to_string())));
        }
        let code = status.as_u16();
        let text = resp.text().unwrap_or_default();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            Err(Failure::Fatal(LlmError::Auth { status: code }))
        } else if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            Err(Failure::Transient {
                status: Some(code),
                message: format!("HTTP {code}: {text}"),
            })
        } else {
            Err(Failure::Fatal(LlmError::Http { status: code, body: text }))
        }
    }
}

fn read_completion(resp: CompletionResponse, want_logprobs: bool, attempts: usize) -> Result<Completion, LlmError> {
    let choice = resp
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::Malformed("no choices".into()))?;
    let (tokens, top_logprobs) = match choice.logprobs {
        Some(lp) if !lp.token_logprobs.is_empty() || !lp.top_logprobs.is_empty() => {
            let mut tokens = Vec::with_capacity(lp.token_logprobs.len());
            for (i, p) in lp.token_logprobs.iter().enumerate() {
                let log_prob = p.ok_or(LlmError::LogprobsUnavailable)?;
                if !log_prob.is_finite() {
                    return Err(LlmError::Malformed(format!("non-finite logprob at position {i}")));
                }
                tokens.push(ScoredToken {
                    token: lp.tokens.get(i).cloned().unwrap_or_default(),
                    log_prob,
                });
            }
            let top = lp.top_logprobs.into_iter().map(Option::unwrap_or_default).collect();
            (tokens, top)
        }
        _ if want_logprobs => return Err(LlmError::LogprobsUnavailable),
        _ => (Vec::new(), Vec::new()),
    };
    Ok(Completion {
        text: choice.text,
        tokens,
        top_logprobs,
        attempts,
    })
}
