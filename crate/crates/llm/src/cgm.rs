use phr_core::cgm::{Cgm, CgmError};
use phr_core::textprompt::{format_context, format_prompt, parse_generated_pairs};
use phr_core::{ExamplePair, TextContext};
use rand::Rng;

use crate::client::{CompletionParams, LlmClient};
use crate::config::LlmEndpointConfig;
use crate::error::LlmError;

/// A completion endpoint viewed as a model over `(text, label)` pairs.
pub struct LlmCgm {
    client: LlmClient,
}

impl LlmCgm {
    pub fn new(config: LlmEndpointConfig) -> Result<Self, LlmError> {
        Ok(Self {
            client: LlmClient::new(config)?,
        })
    }

    pub fn from_client(client: LlmClient) -> Self {
        Self { client }
    }

    pub fn client(&self) -> &LlmClient {
        &self.client
    }

    fn config(&self) -> &LlmEndpointConfig {
        self.client.config()
    }

    fn seed<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        self.config().send_seed.then(|| rng.random())
    }

    /// Samples a one-token label and returns it trimmed, with the
    /// log-probability the server reported for the sampled token.
    pub fn sample_label<R: Rng + ?Sized>(
        &self,
        context: &TextContext,
        query: &str,
        rng: &mut R,
    ) -> Result<(String, f64), LlmError> {
        let cfg = self.config();
        let prompt = format_prompt(&cfg.template, context, query);
        for _ in 0..cfg.retry_budget {
            let seed = self.seed(rng);
            let completion = self.client.complete(&CompletionParams {
                prompt: prompt.clone(),
                max_tokens: 1,
                temperature: cfg.label_temperature,
                top_p: cfg.label_top_p,
                logprobs: Some(cfg.top_logprobs),
                seed,
                cacheable: seed.is_some(),
            })?;
            let label = completion.text.trim();
            if !label.is_empty() {
                let log_prob = completion.tokens.first().map_or(f64::NAN, |t| t.log_prob);
                return Ok((label.to_string(), log_prob));
            }
        }
        Err(LlmError::EmptyGeneration {
            attempts: cfg.retry_budget,
        })
    }

    /// Log-probability of each response's first token at the label
    /// position, from a single scoring request.
    ///
    /// All top-k alternatives that equal the response after trimming
    /// whitespace are pooled, so `" Sports"` and `"Sports"` both count.
    pub fn response_logprobs(
        &self,
        context: &TextContext,
        query: &str,
        responses: &[String],
    ) -> Result<Vec<f64>, LlmError> {
        let cfg = self.config();
        let completion = self.client.complete(&CompletionParams {
            prompt: format_prompt(&cfg.template, context, query),
            max_tokens: 1,
            temperature: 1.0,
            top_p: 1.0,
            logprobs: Some(cfg.top_logprobs),
            seed: None,
            cacheable: true,
        })?;
        let mut candidates = completion.top_logprobs.into_iter().next().ok_or(LlmError::LogprobsUnavailable)?;
        if let Some(t) = completion.tokens.first() {
            candidates.entry(t.token.clone()).or_insert(t.log_prob);
        }
        responses
            .iter()
            .map(|response| {
                let target = response.trim();
                let matches: Vec<f64> = candidates
                    .iter()
                    .filter(|(tok, _)| tok.trim() == target)
                    .map(|(_, &lp)| lp)
                    .collect();
                if matches.is_empty() {
                    return Err(LlmError::ScoringUnsupported {
                        token: response.clone(),
                    });
                }
                Ok(phr_core::scalar::log_sum_exp(&matches))
            })
            .collect()
    }

    /// Generates the next example by continuing the rendered context after
    /// the input marker; returns the first well-formed pair.
    pub fn sample_pair_via_llm<R: Rng + ?Sized>(
        &self,
        context: &TextContext,
        rng: &mut R,
    ) -> Result<ExamplePair<String, String>, LlmError> {
        let cfg = self.config();
        let marker = cfg.template.input_marker();
        let mut prompt = format_context(&cfg.template, context);
        prompt.push_str(marker);
        for _ in 0..cfg.retry_budget {
            let seed = self.seed(rng);
            let completion = self.client.complete(&CompletionParams {
                prompt: prompt.clone(),
                max_tokens: cfg.pair_max_new_tokens,
                temperature: cfg.pair_temperature,
                top_p: cfg.pair_top_p,
                logprobs: None,
                seed,
                cacheable: seed.is_some(),
            })?;
            let text = format!("{marker}{}", completion.text);
            if let Ok(pairs) = parse_generated_pairs(&cfg.template, &text) {
                if let Some(pair) = pairs.into_iter().next() {
                    return Ok(pair);
                }
            }
        }
        Err(LlmError::UnparseableGeneration {
            attempts: cfg.retry_budget,
        })
    }
}

impl Cgm for LlmCgm {
    type Query = String;
    type Response = String;
    type Scalar = f64;

    fn sample_pair<R: Rng + ?Sized>(
        &self,
        context: &TextContext,
        rng: &mut R,
    ) -> Result<ExamplePair<String, String>, CgmError> {
        self.sample_pair_via_llm(context, rng).map_err(CgmError::backend)
    }

    fn sample_response<R: Rng + ?Sized>(
        &self,
        query: &String,
        context: &TextContext,
        rng: &mut R,
    ) -> Result<String, CgmError> {
        self.sample_label(context, query, rng)
            .map(|(label, _)| label)
            .map_err(CgmError::backend)
    }

    fn log_prob(&self, response: &String, query: &String, context: &TextContext) -> Result<f64, CgmError> {
        self.log_probs(std::slice::from_ref(response), query, context)
            .map(|v| v[0])
    }

    fn log_probs(&self, responses: &[String], query: &String, context: &TextContext) -> Result<Vec<f64>, CgmError> {
        self.response_logprobs(context, query, responses)
            .map_err(CgmError::backend)
    }
}
