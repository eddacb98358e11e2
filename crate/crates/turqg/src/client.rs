//! Client for the generation wire protocol.
//!
//! `POST /generate` takes `{"inputs":[..],"max_new_tokens":n,"request_id":".."}`
//! and answers `{"outputs":[..],"model_id":".."}` with one output per input.
//! `GET /health` answers `{"status":"ok","model_id":".."}`.

use std::io::Read;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use turqg_core::pipeline::Generator;

/// Environment variable that overrides the configured backend endpoint.
pub const BACKEND_ENV: &str = "TURQG_BACKEND";

const EXCERPT_CHARS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub inputs: Vec<String>,
    pub max_new_tokens: u32,
    pub request_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub outputs: Vec<String>,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend answered {status}: {excerpt}")]
    Backend { status: u16, excerpt: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl ClientError {
    pub fn is_transient(&self) -> bool {
        match self {
            ClientError::Transport { .. } => true,
            ClientError::Backend { status, .. } => is_transient_status(*status),
            _ => false,
        }
    }
}

pub fn is_transient_status(status: u16) -> bool {
    matches!(status, 429 | 500 | 502 | 503 | 504)
}

/// Exponential backoff without jitter: delay for retry `k` (0-based) is
/// `base * factor^k`, capped at `max_delay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(200),
            max_delay: Duration::from_secs(5),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            ..Self::default()
        }
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let scaled = self.base_delay.as_secs_f64() * self.factor.powi(retry as i32);
        Duration::from_secs_f64(scaled.min(self.max_delay.as_secs_f64()))
    }

    /// Runs `op` until it succeeds, fails permanently or retries run out.
    pub fn run<T, E>(&self, mut op: impl FnMut(u32) -> Result<T, E>, transient: impl Fn(&E) -> bool) -> Result<T, E> {
        let mut attempt = 0;
        loop {
            match op(attempt) {
                Err(e) if attempt < self.max_retries && transient(&e) => {
                    log::debug!("attempt {} failed, retrying in {:?}", attempt + 1, self.delay(attempt));
                    thread::sleep(self.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

fn excerpt(body: &str) -> String {
    let mut s: String = body.chars().take(EXCERPT_CHARS).collect();
    if body.chars().nth(EXCERPT_CHARS).is_some() {
        s.push('…');
    }
    s
}

fn transport(attempts: u32, e: impl std::fmt::Display) -> ClientError {
    ClientError::Transport {
        attempts,
        message: e.to_string(),
    }
}

/// A blocking client bound to one endpoint.
#[derive(Debug, Clone)]
pub struct BackendClient {
    endpoint: String,
    agent: ureq::Agent,
    policy: RetryPolicy,
}

impl BackendClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_timeout(endpoint, Duration::from_secs(120))
    }

    pub fn with_timeout(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_owned(),
            agent: ureq::Agent::new_with_config(config),
            policy: RetryPolicy::default(),
        }
    }

    /// Endpoint from [`BACKEND_ENV`] when set, else `fallback`.
    pub fn from_env_or(fallback: &str) -> Self {
        match std::env::var(BACKEND_ENV) {
            Ok(url) if !url.trim().is_empty() => Self::new(url.trim()),
            _ => Self::new(fallback),
        }
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    pub fn health(&self) -> Result<Health, ClientError> {
        let url = format!("{}/health", self.endpoint);
        self.policy.run(
            |attempt| {
                let resp = self.agent.get(&url).call().map_err(|e| transport(attempt + 1, e))?;
                let status = resp.status().as_u16();
                let body = resp.into_body().read_to_string().map_err(|e| transport(attempt + 1, e))?;
                if !(200..300).contains(&status) {
                    return Err(ClientError::Backend { status, excerpt: excerpt(&body) });
                }
                serde_json::from_str(&body).map_err(|e| ClientError::Protocol(format!("health body: {e}")))
            },
            ClientError::is_transient,
        )
    }

    /// Sends one batch. Transient failures are retried under the client's
    /// policy with the same `request_id`.
    pub fn generate_batch(&self, request: &GenerationRequest) -> Result<GenerationResponse, ClientError> {
        if request.inputs.is_empty() {
            return Err(ClientError::InvalidRequest("inputs must not be empty".into()));
        }
        if request.max_new_tokens == 0 {
            return Err(ClientError::InvalidRequest("max_new_tokens must be at least 1".into()));
        }
        let url = format!("{}/generate", self.endpoint);
        let response: GenerationResponse = self.policy.run(
            |attempt| {
                let resp = self
                    .agent
                    .post(&url)
                    .send_json(request)
                    .map_err(|e| transport(attempt + 1, e))?;
                let status = resp.status().as_u16();
                let mut body = String::new();
                resp.into_body()
                    .into_reader()
                    .read_to_string(&mut body)
                    .map_err(|e| transport(attempt + 1, e))?;
                if !(200..300).contains(&status) {
                    return Err(ClientError::Backend { status, excerpt: excerpt(&body) });
                }
                serde_json::from_str(&body).map_err(|e| ClientError::Protocol(format!("response body: {e}")))
            },
            ClientError::is_transient,
        )?;
        if response.outputs.len() != request.inputs.len() {
            return Err(ClientError::Protocol(format!(
                "{} outputs for {} inputs",
                response.outputs.len(),
                request.inputs.len()
            )));
        }
        Ok(response)
    }
}

/// Free-function form of [`BackendClient::generate_batch`].
pub fn generate_batch(
    endpoint: &str,
    request: &GenerationRequest,
    policy: RetryPolicy,
) -> Result<GenerationResponse, ClientError> {
    BackendClient::new(endpoint).with_policy(policy).generate_batch(request)
}

/// A [`Generator`] over HTTP: splits inputs into batches and sends them
/// with at most `max_in_flight` concurrent requests. Outputs come back in
/// input order.
#[derive(Debug)]
pub struct HttpBackend {
    client: BackendClient,
    batch_size: usize,
    max_in_flight: usize,
    max_new_tokens: u32,
    id_prefix: String,
    next_id: AtomicU64,
}

// Request ids only need to be unique per endpoint; outputs never depend on
// them.
fn session_prefix() -> String {
    use std::hash::{BuildHasher, Hasher};
    let mut h = std::collections::hash_map::RandomState::new().build_hasher();
    h.write_u32(std::process::id());
    format!("turqg-{:016x}", h.finish())
}

impl HttpBackend {
    pub fn new(client: BackendClient) -> Self {
        Self {
            client,
            batch_size: 8,
            max_in_flight: 4,
            max_new_tokens: 64,
            id_prefix: session_prefix(),
            next_id: AtomicU64::new(0),
        }
    }

    pub fn batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn max_new_tokens(mut self, n: u32) -> Self {
        self.max_new_tokens = n.max(1);
        self
    }

    pub fn id_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.id_prefix = prefix.into();
        self
    }

    pub fn client(&self) -> &BackendClient {
        &self.client
    }

    fn request(&self, chunk: &[String]) -> GenerationRequest {
        let n = self.next_id.fetch_add(1, Ordering::Relaxed);
        GenerationRequest {
            inputs: chunk.to_vec(),
            max_new_tokens: self.max_new_tokens,
            request_id: format!("{}-{n}", self.id_prefix),
        }
    }
}

impl Generator for HttpBackend {
    type Error = ClientError;

    fn generate(&self, inputs: &[String]) -> Vec<Result<String, ClientError>> {
        let chunks: Vec<&[String]> = inputs.chunks(self.batch_size).collect();
        let results: Vec<Mutex<Option<Result<GenerationResponse, ClientError>>>> =
            chunks.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.max_in_flight.min(chunks.len());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(chunk) = chunks.get(i) else { break };
                    let outcome = self.client.generate_batch(&self.request(chunk));
                    *results[i].lock().unwrap() = Some(outcome);
                });
            }
        });

        let mut out = Vec::with_capacity(inputs.len());
        for (chunk, slot) in chunks.iter().zip(results) {
            match slot.into_inner().unwrap().expect("every chunk is sent") {
                Ok(resp) => out.extend(resp.outputs.into_iter().map(Ok)),
                Err(e) => out.extend(chunk.iter().map(|_| Err(e.clone()))),
            }
        }
        out
    }
}
