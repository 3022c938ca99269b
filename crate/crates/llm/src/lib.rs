//! Completion-endpoint backend for the `phr-core` estimators.
//!
//! [`LlmCgm`] exposes an OpenAI-compatible `/v1/completions` server as a
//! conditional generative model over text labels: responses are sampled one
//! token at a time, imagined examples are generated in the prompt format of
//! [`phr_core::textprompt`], and log-probabilities are read from the
//! server's top-k token logprobs.

mod cache;
mod cgm;
mod client;
mod config;
mod error;
#[cfg(feature = "stub")]
pub mod stub;
pub mod wire;

pub use cache::ResponseCache;
pub use cgm::LlmCgm;
pub use client::{Completion, CompletionParams, LlmClient, RequestStats, ScoredToken};
pub use config::LlmEndpointConfig;
pub use error::LlmError;
