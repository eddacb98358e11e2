//! Deterministic mock backend speaking the generation wire protocol.
//!
//! Each input is answered by the first fixture whose matcher accepts it.
//! Unmatched inputs get [`fallback_output`].

use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;
use turqg_core::format::tokens;

use crate::client::{GenerationRequest, GenerationResponse, Health};

#[derive(Debug, thiserror::Error)]
pub enum MockError {
    #[error("cannot read fixtures {path}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid fixtures at {path}: {message}")]
    Fixtures { path: String, message: String },
    #[error("cannot start mock server on {addr}")]
    Startup { addr: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Prefix,
    Contains,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matcher {
    pub kind: MatchKind,
    pub pattern: String,
}

impl Matcher {
    pub fn accepts(&self, input: &str) -> bool {
        match self.kind {
            MatchKind::Exact => input == self.pattern,
            MatchKind::Prefix => input.starts_with(&self.pattern),
            MatchKind::Contains => input.contains(&self.pattern),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub output: String,
}

/// Ordered fixture list; immutable once loaded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureTable {
    fixtures: Vec<Fixture>,
}

impl FixtureTable {
    pub fn new(fixtures: Vec<Fixture>) -> Self {
        Self { fixtures }
    }

    pub fn parse(json: &str, origin: &str) -> Result<Self, MockError> {
        let de = &mut serde_json::Deserializer::from_str(json);
        let fixtures = serde_path_to_error::deserialize(de).map_err(|e| MockError::Fixtures {
            path: format!("{origin}:{}", e.path()),
            message: e.into_inner().to_string(),
        })?;
        Ok(Self { fixtures })
    }

    pub fn load(path: &Path) -> Result<Self, MockError> {
        let text = std::fs::read_to_string(path).map_err(|source| MockError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn fixtures(&self) -> &[Fixture] {
        &self.fixtures
    }

    pub fn respond(&self, input: &str) -> String {
        self.fixtures
            .iter()
            .find(|f| f.matcher.accepts(input))
            .map(|f| f.output.clone())
            .unwrap_or_else(|| fallback_output(input))
    }
}

const TERMINATORS: [char; 4] = ['.', '!', '?', '…'];

/// The text between the first two highlight tokens, trimmed and without
/// trailing sentence terminators; otherwise the first five whitespace
/// tokens of the input.
pub fn fallback_output(input: &str) -> String {
    let hl = tokens::HIGHLIGHT;
    if let Some(open) = input.find(hl) {
        let rest = &input[open + hl.len()..];
        if let Some(close) = rest.find(hl) {
            return rest[..close].trim().trim_end_matches(TERMINATORS).trim_end().to_owned();
        }
    }
    input.split_whitespace().take(5).collect::<Vec<_>>().join(" ")
}

/// Fault injection and identity knobs for tests.
#[derive(Debug, Clone)]
pub struct MockOptions {
    pub model_id: String,
    /// Fail this many `/generate` requests before serving normally.
    pub fail_first: usize,
    pub fail_status: u16,
    /// Drop the last output of every response.
    pub truncate: bool,
    /// Sleep this long inside every `/generate` request.
    pub delay: Duration,
}

impl Default for MockOptions {
    fn default() -> Self {
        Self {
            model_id: "mock".into(),
            fail_first: 0,
            fail_status: 503,
            truncate: false,
            delay: Duration::ZERO,
        }
    }
}

#[derive(Debug, Default)]
pub struct MockStats {
    requests: AtomicUsize,
    inputs: AtomicUsize,
    replays: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl MockStats {
    /// `/generate` requests received, failed ones included.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Inputs answered, replays excluded.
    pub fn inputs(&self) -> usize {
        self.inputs.load(Ordering::SeqCst)
    }

    pub fn replays(&self) -> usize {
        self.replays.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }
}

struct AppState {
    table: FixtureTable,
    options: MockOptions,
    stats: Arc<MockStats>,
    answered: Mutex<HashMap<String, GenerationResponse>>,
}

struct InFlight<'a>(&'a MockStats);

impl<'a> InFlight<'a> {
    fn enter(stats: &'a MockStats) -> Self {
        let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
        Self(stats)
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

fn error(status: StatusCode, message: &str) -> Response {
    (status, Json(serde_json::json!({ "error": message }))).into_response()
}

async fn generate(State(state): State<Arc<AppState>>, Json(req): Json<GenerationRequest>) -> Response {
    let stats = &state.stats;
    let _guard = InFlight::enter(stats);
    let n = stats.requests.fetch_add(1, Ordering::SeqCst);
    if !state.options.delay.is_zero() {
        tokio::time::sleep(state.options.delay).await;
    }
    if n < state.options.fail_first {
        let status = StatusCode::from_u16(state.options.fail_status).unwrap_or(StatusCode::SERVICE_UNAVAILABLE);
        return error(status, "injected failure");
    }
    if req.inputs.is_empty() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, "inputs must not be empty");
    }
    if req.max_new_tokens == 0 {
        return error(StatusCode::UNPROCESSABLE_ENTITY, "max_new_tokens must be at least 1");
    }

    if let Some(previous) = state.answered.lock().unwrap().get(&req.request_id) {
        stats.replays.fetch_add(1, Ordering::SeqCst);
        return Json(previous.clone()).into_response();
    }
    let mut outputs: Vec<String> = req.inputs.iter().map(|i| state.table.respond(i)).collect();
    stats.inputs.fetch_add(req.inputs.len(), Ordering::SeqCst);
    if state.options.truncate {
        outputs.pop();
    }
    let response = GenerationResponse {
        outputs,
        model_id: state.options.model_id.clone(),
    };
    state
        .answered
        .lock()
        .unwrap()
        .insert(req.request_id, response.clone());
    Json(response).into_response()
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_id: state.options.model_id.clone(),
    })
}

pub fn router(table: FixtureTable, options: MockOptions, stats: Arc<MockStats>) -> Router {
    let state = Arc::new(AppState {
        table,
        options,
        stats,
        answered: Mutex::new(HashMap::new()),
    });
    Router::new()
        .route("/generate", post(generate))
        .route("/health", get(health))
        .with_state(state)
}

/// A mock server running on a background thread. Dropping the handle
/// shuts it down.
#[derive(Debug)]
pub struct MockServer {
    addr: SocketAddr,
    stats: Arc<MockStats>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl MockServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn start(addr: &str, table: FixtureTable, options: MockOptions) -> Result<Self, MockError> {
        let startup = |source| MockError::Startup {
            addr: addr.to_owned(),
            source,
        };
        let listener = TcpListener::bind(addr).map_err(startup)?;
        listener.set_nonblocking(true).map_err(startup)?;
        let local = listener.local_addr().map_err(startup)?;
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()
            .map_err(startup)?;

        let stats = Arc::new(MockStats::default());
        let app = router(table, options, Arc::clone(&stats));
        let (tx, rx) = oneshot::channel();
        let thread = std::thread::Builder::new()
            .name("turqg-mock".into())
            .spawn(move || {
                runtime.block_on(async move {
                    let listener = tokio::net::TcpListener::from_std(listener)?;
                    axum::serve(listener, app)
                        .with_graceful_shutdown(async {
                            rx.await.ok();
                        })
                        .await
                })
            })
            .map_err(startup)?;
        Ok(Self {
            addr: local,
            stats,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stats(&self) -> &MockStats {
        &self.stats
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) -> std::io::Result<()> {
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("mock server panicked"))),
            None => Ok(()),
        }
    }

    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("mock server panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}
