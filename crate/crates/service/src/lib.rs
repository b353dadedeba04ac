//! HTTP facade over exploration sessions.
//!
//! All routes live under `/v1`:
//!
//! | method | path                          | body / query                         |
//! |--------|-------------------------------|--------------------------------------|
//! | POST   | `/sessions`                   | `{seed, langs, config, rng_seed}`    |
//! | GET    | `/sessions/{id}`              |                                      |
//! | GET    | `/sessions/{id}/events`       | `?after=SEQ&follow=BOOL`, `Last-Event-ID` |
//! | POST   | `/sessions/{id}/recenter`     | `{lang, word}`                       |
//! | GET    | `/sessions/{id}/examples`     | `?n=20&u=lang:word&v=lang:word&seed=` |
//! | GET    | `/search`                     | `?q=PREFIX&lang=LANG&limit=`         |
//! | GET    | `/healthz`                    |                                      |
//!
//! Errors are returned as `{"code": ..., "message": ...}`.

mod error;
mod session;

use std::collections::{HashMap, VecDeque};
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use interlangue_core::layout::session_snapshot;
use interlangue_core::sampler::{sample_examples, ExampleBatch, ExampleRequest};
use interlangue_core::{
    Event, ExampleStore, ExplorationSession, Lang, LangPair, LangueNetwork, PairSpec, Phase,
    SessionOptions, Snapshot, SolverConfig, WordId,
};

pub use error::{ApiError, ErrorBody};
pub use session::{SessionHandle, SessionMeta, View, WorkerSettings};

use session::Command;

/// Largest `n` accepted by the examples endpoint.
pub const MAX_EXAMPLES: usize = 1000;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub solver: SolverConfig,
    /// Quiet converged rounds before a session counts as steady.
    pub idle_rounds: u32,
    pub worker: WorkerSettings,
    /// Seeds placement jitter unless a request supplies its own.
    pub rng_seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            solver: SolverConfig::default(),
            idle_rounds: SessionOptions::default().idle_rounds,
            worker: WorkerSettings {
                park_after: Duration::from_secs(300),
                round_interval: Duration::ZERO,
                max_rounds: 5000,
                log_dir: None,
            },
            rng_seed: 0,
        }
    }
}

impl ServiceConfig {
    pub fn with_log_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.worker.log_dir = Some(dir.into());
        self
    }
}

struct Inner {
    network: Arc<LangueNetwork>,
    examples: Arc<ExampleStore>,
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(
        network: Arc<LangueNetwork>,
        examples: Arc<ExampleStore>,
        config: ServiceConfig,
    ) -> Self {
        AppState(Arc::new(Inner {
            network,
            examples,
            config,
            sessions: Mutex::new(HashMap::new()),
        }))
    }

    pub fn network(&self) -> &Arc<LangueNetwork> {
        &self.0.network
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    /// The session with `id`, loading it from the event-log directory if needed.
    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        let mut sessions = self.0.sessions.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(h) = sessions.get(id) {
            return Ok(h.clone());
        }
        let valid_id = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
        let loaded = self
            .0
            .config
            .worker
            .log_dir
            .as_ref()
            .filter(|_| valid_id)
            .and_then(|dir| SessionHandle::load(dir, id, &self.0.network));
        match loaded {
            Some(h) => {
                sessions.insert(id.to_string(), h.clone());
                Ok(h)
            }
            None => Err(ApiError::no_session(id)),
        }
    }

    /// As [`AppState::session`], restarting a parked session's worker.
    pub fn live_session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        let h = self.session(id)?;
        if h.is_parked() {
            h.wake(&self.0.network, &self.0.config.worker)?;
        }
        Ok(h)
    }

    pub fn create_session(
        &self,
        req: CreateSession,
    ) -> Result<(Arc<SessionHandle>, Snapshot), ApiError> {
        let network = &self.0.network;
        let seed = req.seed.into_word()?;
        let pairs = if req.langs.is_empty() {
            PairSpec::new(network.language_pairs().map(|(p, _)| p.clone()))
        } else {
            let pairs = req
                .langs
                .into_iter()
                .map(|(a, b)| LangPair::new(a, b))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ApiError::bad_request(e.to_string()))?;
            PairSpec::new(pairs)
        };
        let config = merge_config(&self.0.config.solver, req.config)?;
        let options = SessionOptions {
            rng_seed: req.rng_seed.unwrap_or(self.0.config.rng_seed),
            idle_rounds: self.0.config.idle_rounds,
        };
        let id = format!("{:016x}", rand::rng().random::<u64>());
        let session =
            ExplorationSession::start(id.clone(), seed, pairs, network.clone(), config, options)?;
        let snapshot = session_snapshot(&session)?;
        let handle = SessionHandle::spawn(session, self.0.config.worker.clone())
            .map_err(|e| ApiError::internal(format!("cannot start session: {e}")))?;
        self.0
            .sessions
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id, handle.clone());
        Ok((handle, snapshot))
    }
}

fn merge_config(
    base: &SolverConfig,
    overrides: serde_json::Map<String, serde_json::Value>,
) -> Result<SolverConfig, ApiError> {
    let mut value = serde_json::to_value(base).expect("config serializes");
    let obj = value.as_object_mut().expect("config is an object");
    for (k, v) in overrides {
        obj.insert(k, v);
    }
    let config: SolverConfig = serde_json::from_value(value)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", e.to_string()))?;
    config
        .validate()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", e.to_string()))?;
    Ok(config)
}

/// A word given as `"lang:word"` or `{"lang": ..., "word": ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WordSpec {
    Text(String),
    Id(WordId),
}

impl WordSpec {
    fn into_word(self) -> Result<WordId, ApiError> {
        match self {
            WordSpec::Id(w) => Ok(w),
            WordSpec::Text(s) => {
                WordId::parse(&s).map_err(|e| ApiError::bad_request(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub seed: WordSpec,
    /// Language pairs to explore; every pair in the network when empty.
    #[serde(default)]
    pub langs: Vec<(Lang, Lang)>,
    /// Solver settings overriding the service defaults.
    #[serde(default)]
    pub config: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub rng_seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub phase: Phase,
    pub round: u64,
    pub last_seq: u64,
    pub parked: bool,
    pub failure: Option<String>,
    pub snapshot: Snapshot,
}

#[derive(Debug, Deserialize)]
pub struct EventsQuery {
    pub after: Option<u64>,
    /// With `false` the stream ends once the session is idle and caught up.
    pub follow: Option<bool>,
}

#[derive(Debug, Deserialize)]
pub struct ExamplesQuery {
    pub n: Option<usize>,
    pub u: Option<String>,
    pub v: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct SearchQuery {
    pub q: String,
    pub lang: Option<Lang>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchHit {
    pub lang: Lang,
    pub word: String,
    pub count: u64,
}

pub fn router(state: AppState) -> Router {
    let v1 = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/events", get(stream_events))
        .route("/sessions/{id}/recenter", post(recenter))
        .route("/sessions/{id}/examples", get(examples))
        .route("/search", get(search))
        .route("/healthz", get(healthz));
    Router::new().nest("/v1", v1).with_state(state)
}

/// Serves until the future `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

fn json_body<T: serde::de::DeserializeOwned>(
    body: Result<Json<T>, axum::extract::rejection::JsonRejection>,
) -> Result<T, ApiError> {
    body.map(|Json(b)| b)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn create_session(
    State(app): State<AppState>,
    body: Result<Json<CreateSession>, axum::extract::rejection::JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let req = json_body(body)?;
    let (handle, snapshot) = tokio::task::spawn_blocking(move || app.create_session(req))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id: handle.id().to_string(),
            snapshot,
        }),
    ))
}

async fn get_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionStatus>, ApiError> {
    let h = app.session(&id)?;
    let view = h.view().clone();
    let parked = h.is_parked();
    let snapshot = Snapshot::capture(
        &view.state,
        app.network(),
        &h.meta.pairs,
        &h.meta.config,
        view.round,
    )
    .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(SessionStatus {
        session_id: id,
        phase: view.phase,
        round: view.round,
        last_seq: view.last_seq(),
        parked,
        failure: view.failure,
        snapshot,
    }))
}

fn sse_event(e: &Event) -> SseEvent {
    SseEvent::default()
        .event(e.kind.name())
        .id(e.seq.to_string())
        .data(e.to_json())
}

async fn stream_events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ApiError> {
    let handle = app.live_session(&id)?;
    let header_cursor = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|s| s.trim().parse::<u64>().ok());
    let after = q.after.or(header_cursor).unwrap_or(0);
    let follow = q.follow.unwrap_or(true);
    let rx = handle.subscribe();

    let stream = futures::stream::unfold(
        (handle, rx, after, VecDeque::<Event>::new()),
        move |(handle, mut rx, mut cursor, mut buf)| async move {
            loop {
                if let Some(e) = buf.pop_front() {
                    cursor = e.seq;
                    let item = sse_event(&e);
                    return Some((Ok(item), (handle, rx, cursor, buf)));
                }
                rx.borrow_and_update();
                let idle = {
                    let view = handle.view();
                    buf.extend(view.events_after(cursor).iter().cloned());
                    view.idle()
                };
                if !buf.is_empty() {
                    continue;
                }
                if !follow && idle {
                    return None;
                }
                if rx.changed().await.is_err() {
                    return None;
                }
            }
        },
    );
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn recenter(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<WordId>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<Event>, ApiError> {
    let word = json_body(body)?;
    let handle = app.session(&id)?;
    let (tx, rx) = oneshot::channel();
    handle.send(
        app.network(),
        &app.config().worker,
        Some(Command::Recenter { word, reply: tx }),
    )?;
    let event = rx
        .await
        .map_err(|_| ApiError::internal("session worker stopped"))??;
    Ok(Json(event))
}

async fn examples(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ExamplesQuery>,
) -> Result<Json<ExampleBatch>, ApiError> {
    let handle = app.session(&id)?;
    let n = q.n.unwrap_or(20);
    if n == 0 || n > MAX_EXAMPLES {
        return Err(ApiError::bad_request(format!(
            "n must be in 1..={MAX_EXAMPLES}"
        )));
    }
    let edge = match (q.u, q.v) {
        (None, None) => None,
        (Some(u), Some(v)) => {
            let parse =
                |s: &str| WordId::parse(s).map_err(|e| ApiError::bad_request(e.to_string()));
            Some((parse(&u)?, parse(&v)?))
        }
        _ => return Err(ApiError::bad_request("u and v must be given together")),
    };
    let request = ExampleRequest { n, edge };
    let state = handle.view().state.clone();
    let batch = {
        let mut seeded;
        let mut shared;
        let rng: &mut ChaCha8Rng = match q.seed {
            Some(s) => {
                seeded = ChaCha8Rng::seed_from_u64(s);
                &mut seeded
            }
            None => {
                shared = handle.rng.lock().unwrap_or_else(|p| p.into_inner());
                &mut shared
            }
        };
        sample_examples(
            &state,
            app.network(),
            &handle.meta.pairs,
            &app.0.examples,
            handle.meta.config.alpha_x,
            &request,
            rng,
        )?
    };
    Ok(Json(batch))
}

async fn search(State(app): State<AppState>, Query(q): Query<SearchQuery>) -> Json<Vec<SearchHit>> {
    let limit = q.limit.unwrap_or(20).min(200);
    let net = app.network();
    let langs: Vec<Lang> = match q.lang {
        Some(l) => vec![l],
        None => {
            let mut ls: Vec<Lang> = net
                .language_pairs()
                .flat_map(|(p, _)| [p.first().clone(), p.second().clone()])
                .collect();
            ls.sort();
            ls.dedup();
            ls
        }
    };
    let mut hits = Vec::new();
    for lang in langs {
        for w in net.search_prefix(&lang, &q.q, limit - hits.len().min(limit)) {
            let count = net.index_of(&w).map_or(0, |i| net.occurrence(i));
            hits.push(SearchHit {
                lang: w.lang,
                word: w.word,
                count,
            });
        }
    }
    hits.truncate(limit);
    Json(hits)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}
