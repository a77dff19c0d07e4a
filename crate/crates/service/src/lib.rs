//! JSON/HTTP sessions for human players.
//!
//! | method | path                    | body                                   |
//! |--------|-------------------------|----------------------------------------|
//! | POST   | `/sessions`             | `{"condition": "...", "probe_budget": n \| null}` |
//! | GET    | `/sessions/{id}`        |                                        |
//! | POST   | `/sessions/{id}/probe`  | `{"server": n \| null}`                |
//! | POST   | `/sessions/{id}/attack` | `{"server": n \| null}`                |
//! | GET    | `/sessions/{id}/export` |                                        |
//!
//! Probe and attack requests may carry an `Idempotency-Key` header; a repeated
//! key returns the first reply without acting again. Server kinds and costs
//! only ever appear in the attack reply.
//!
//! With a data directory every session is an append-only JSON-lines file that
//! is replayed on startup.

mod error;
mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dg_core::{CostScheme, ServerId};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;
use uuid::Uuid;

pub use error::ApiError;
pub use session::{Event, OutcomeView, ProbeEntry, Session, StateView};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<Uuid, Arc<Mutex<Session>>>>>,
    data_dir: Option<PathBuf>,
}

impl AppState {
    /// Sessions kept in memory only.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Sessions persisted under `dir`; existing logs are replayed.
    pub fn open(dir: &Path) -> Result<Self, ApiError> {
        std::fs::create_dir_all(dir).map_err(|e| ApiError::Storage(format!("{}: {e}", dir.display())))?;
        let mut sessions = HashMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| ApiError::Storage(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(|e| ApiError::Storage(e.to_string()))?.path();
            if path.extension().is_some_and(|ext| ext == "jsonl") {
                let session = session::replay(&path)?;
                sessions.insert(session.id, Arc::new(Mutex::new(session)));
            }
        }
        Ok(Self {
            sessions: Arc::new(RwLock::new(sessions)),
            data_dir: Some(dir.to_path_buf()),
        })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map lock").len()
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let not_found = || ApiError::NotFound(id.to_string());
        let uuid = Uuid::parse_str(id).map_err(|_| not_found())?;
        self.sessions
            .read()
            .expect("session map lock")
            .get(&uuid)
            .cloned()
            .ok_or_else(not_found)
    }

    fn persist(&self, id: Uuid, event: &Event) -> Result<(), ApiError> {
        match &self.data_dir {
            Some(dir) => session::append_event(&session::log_path(dir, id), event),
            None => Ok(()),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/probe", post(post_probe))
        .route("/sessions/{id}/attack", post(post_attack))
        .route("/sessions/{id}/export", get(export_session))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, data_dir: &Path) -> Result<(), ApiError> {
    let state = AppState::open(data_dir)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ApiError::Storage(format!("binding {addr}: {e}")))?;
    axum::serve(listener, router(state))
        .await
        .map_err(|e| ApiError::Storage(e.to_string()))
}

// Parses the body ourselves so malformed requests get the JSON error shape.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let body: &[u8] = if body.is_empty() { b"{}" } else { body };
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    condition: String,
    #[serde(default)]
    probe_budget: Option<usize>,
    /// Fixes the round layout; random when absent.
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionRequest {
    #[serde(default)]
    server: Option<ServerId>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse(&body)?;
    let condition: CostScheme = req
        .condition
        .parse()
        .map_err(|_| ApiError::UnknownCondition(req.condition.clone()))?;
    let id = Uuid::new_v4();
    let seed = req.seed.unwrap_or_else(rand::random);
    let session = Session::new(id, condition, req.probe_budget, seed)?;
    state.persist(
        id,
        &Event::Created {
            session_id: id,
            condition,
            probe_budget: req.probe_budget,
            seed,
        },
    )?;
    let body = json!({ "session_id": id, "state": session.state() });
    state
        .sessions
        .write()
        .expect("session map lock")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    let session = state.get(&id)?;
    let session = session.lock().await;
    Ok(Json(json!({ "session_id": session.id, "state": session.state() })))
}

fn idempotency_key(headers: &HeaderMap) -> Result<Option<String>, ApiError> {
    headers
        .get(IDEMPOTENCY_HEADER)
        .map(|v| {
            v.to_str()
                .map(str::to_string)
                .map_err(|_| ApiError::BadRequest("Idempotency-Key must be visible ASCII".into()))
        })
        .transpose()
}

#[derive(Clone, Copy)]
enum Action {
    Probe,
    Attack,
}

async fn act(
    state: AppState,
    id: String,
    headers: HeaderMap,
    body: Bytes,
    action: Action,
) -> Result<Json<Value>, ApiError> {
    let key = idempotency_key(&headers)?;
    let req: ActionRequest = parse(&body)?;
    let handle = state.get(&id)?;
    let mut session = handle.lock().await;
    if let Some(reply) = key.as_deref().and_then(|k| session.reply_for(k)) {
        return Ok(Json(reply.clone()));
    }
    let event = match action {
        Action::Probe => Event::Probe {
            server: req.server,
            idempotency_key: key,
        },
        Action::Attack => Event::Attack {
            server: req.server,
            idempotency_key: key,
        },
    };
    // act on a copy so a failed write leaves memory and disk in step
    let mut next = session.clone();
    let reply = next.apply(&event)?;
    state.persist(session.id, &event)?;
    *session = next;
    Ok(Json(reply))
}

async fn post_probe(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    act(state, id, headers, body, Action::Probe).await
}

async fn post_attack(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    act(state, id, headers, body, Action::Attack).await
}

async fn export_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let session = state.get(&id)?;
    let csv = session.lock().await.export_csv()?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}
