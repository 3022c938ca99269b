//! Local completion server with scripted or synthetic behaviour.
//!
//! Sampling is driven by the request's `seed` field when present (and by a
//! request counter otherwise), so seeded clients see reproducible output
//! regardless of request interleaving.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// A canned HTTP reply.
#[derive(Debug, Clone, PartialEq)]
pub struct StubReply {
    pub status: u16,
    pub body: Value,
}

impl StubReply {
    pub fn ok(body: Value) -> Self {
        Self { status: 200, body }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            body: json!({ "error": { "message": "stub error" } }),
        }
    }

    /// A `200` whose only choice has `text` and no logprobs.
    pub fn text(text: &str) -> Self {
        Self::ok(json!({ "choices": [{ "text": text }] }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StubBehavior {
    /// Replies in order; the last one repeats.
    Scripted(Vec<StubReply>),
    /// One-token requests draw from a fixed token distribution; longer
    /// requests cycle through `generations`.
    Tokens {
        distribution: Vec<(String, f64)>,
        generations: Vec<String>,
    },
    /// Dirichlet-categorical labels: the next label has probability
    /// `(count + alpha) / (n + C alpha)` given the `Label:` lines already in
    /// the prompt. Longer requests emit one synthetic example with a label
    /// from the same rule.
    Contextual { labels: Vec<String>, alpha: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StubOptions {
    /// Artificial latency per request.
    pub delay: Duration,
    /// Reject requests without `Authorization: Bearer <key>`.
    pub require_api_key: Option<String>,
}

#[derive(Default)]
struct Shared {
    requests: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    bodies: Mutex<Vec<Value>>,
}

struct AppState {
    behavior: StubBehavior,
    options: StubOptions,
    shared: Arc<Shared>,
}

/// Handle to a running stub; the server stops when this is dropped.
pub struct StubServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl StubServer {
    pub fn start(behavior: StubBehavior) -> Self {
        Self::start_with(behavior, StubOptions::default())
    }

    pub fn start_with(behavior: StubBehavior, options: StubOptions) -> Self {
        let shared = Arc::new(Shared::default());
        let state = Arc::new(AppState {
            behavior,
            options,
            shared: shared.clone(),
        });
        let listener = std::net::TcpListener::bind("127.0.0.1:0").expect("bind stub listener");
        listener.set_nonblocking(true).expect("nonblocking listener");
        let addr = listener.local_addr().expect("listener address");
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("stub runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("tokio listener");
                let app = Router::new()
                    .route("/v1/completions", post(completions))
                    .with_state(state);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .expect("stub server");
            });
        });
        Self {
            addr,
            shared,
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> usize {
        self.shared.requests.load(Ordering::SeqCst)
    }

    /// Highest number of requests that were being handled at once.
    pub fn max_in_flight(&self) -> usize {
        self.shared.max_in_flight.load(Ordering::SeqCst)
    }

    /// Request bodies in arrival order.
    pub fn bodies(&self) -> Vec<Value> {
        self.shared.bodies.lock().expect("stub lock").clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

async fn completions(State(state): State<Arc<AppState>>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
    let shared = &state.shared;
    let index = shared.requests.fetch_add(1, Ordering::SeqCst);
    let now = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    shared.max_in_flight.fetch_max(now, Ordering::SeqCst);
    shared.bodies.lock().expect("stub lock").push(body.clone());
    if !state.options.delay.is_zero() {
        tokio::time::sleep(state.options.delay).await;
    }
    let reply = respond(&state, &headers, &body, index);
    shared.in_flight.fetch_sub(1, Ordering::SeqCst);
    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(reply.body)).into_response()
}

fn respond(state: &AppState, headers: &HeaderMap, body: &Value, index: usize) -> StubReply {
    if let Some(key) = &state.options.require_api_key {
        let expected = format!("Bearer {key}");
        let given = headers.get("authorization").and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return StubReply::status(401);
        }
    }
    let prompt = body["prompt"].as_str().unwrap_or_default();
    let max_tokens = body["max_tokens"].as_u64().unwrap_or(16);
    let top_k = body["logprobs"].as_u64().map(|k| k as usize);
    let mut rng = match body["seed"].as_u64() {
        Some(seed) => ChaCha8Rng::seed_from_u64(seed),
        None => ChaCha8Rng::seed_from_u64(index as u64 ^ 0x5eed),
    };
    match &state.behavior {
        StubBehavior::Scripted(replies) => replies
            .get(index)
            .or(replies.last())
            .cloned()
            .unwrap_or_else(|| StubReply::status(500)),
        StubBehavior::Tokens {
            distribution,
            generations,
        } => {
            if max_tokens == 1 {
                token_reply(distribution, top_k, &mut rng)
            } else {
                let text = generations.get(index % generations.len().max(1)).cloned().unwrap_or_default();
                StubReply::text(&text)
            }
        }
        StubBehavior::Contextual { labels, alpha } => {
            let dist = contextual_distribution(labels, *alpha, prompt);
            if max_tokens == 1 {
                token_reply(&dist, top_k, &mut rng)
            } else {
                let label = sample(&dist, &mut rng).trim().to_string();
                let id: u32 = rng.random_range(0..1_000_000);
                StubReply::text(&format!(" synthetic example {id}\nLabel: {label}\n\nInput:"))
            }
        }
    }
}

fn contextual_distribution(labels: &[String], alpha: f64, prompt: &str) -> Vec<(String, f64)> {
    let mut counts: BTreeMap<&str, usize> = labels.iter().map(|l| (l.as_str(), 0)).collect();
    let mut n = 0;
    for line in prompt.lines() {
        if let Some(label) = line.strip_prefix("Label: ") {
            if let Some(c) = counts.get_mut(label.trim()) {
                *c += 1;
                n += 1;
            }
        }
    }
    let total = n as f64 + alpha * labels.len() as f64;
    labels
        .iter()
        .map(|l| (format!(" {l}"), (counts[l.as_str()] as f64 + alpha) / total))
        .collect()
}

fn sample<'a>(dist: &'a [(String, f64)], rng: &mut ChaCha8Rng) -> &'a str {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (tok, p) in dist {
        cum += p;
        if u < cum {
            return tok;
        }
    }
    &dist.last().expect("non-empty distribution").0
}

fn token_reply(dist: &[(String, f64)], top_k: Option<usize>, rng: &mut ChaCha8Rng) -> StubReply {
    let token = sample(dist, rng).to_string();
    let p = dist.iter().find(|(t, _)| *t == token).map_or(0.0, |(_, p)| *p);
    let mut choice = json!({ "text": token });
    if let Some(k) = top_k {
        let mut ranked: Vec<&(String, f64)> = dist.iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let top: serde_json::Map<String, Value> = ranked
            .into_iter()
            .take(k)
            .map(|(t, p)| (t.clone(), json!(p.ln())))
            .collect();
        choice["logprobs"] = json!({
            "tokens": [token],
            "token_logprobs": [p.ln()],
            "top_logprobs": [top],
        });
    }
    StubReply::ok(json!({ "choices": [choice] }))
}
