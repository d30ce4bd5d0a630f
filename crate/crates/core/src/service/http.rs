//! HTTP and websocket front end for sessions.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc::unbounded_channel;

use super::session::SessionHandle;
use crate::error::Error;
use crate::events::to_ndjson;
use crate::intervention::Intervention;
use crate::scenario::ScenarioConfig;

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<BTreeMap<u64, SessionHandle>>,
    next_id: AtomicU64,
}

impl AppState {
    fn get(&self, id: u64) -> Result<SessionHandle, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id}")))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { error: error.into(), violations: Vec::new() } }
    }

    fn bad_request(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::BAD_REQUEST, e.to_string())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(v) => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: ErrorBody { error: "invalid scenario".into(), violations: v.violations },
            },
            Error::Parse { .. } => Self::bad_request(e),
            Error::Rejected(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// Body of `POST /sessions`. `scenario` is a bundled scenario name or a full
/// scenario document.
#[derive(Debug, Deserialize)]
struct CreateSession {
    scenario: serde_json::Value,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ControlCommand {
    Step {
        #[serde(default = "one")]
        n: u64,
    },
    Play {
        ticks_per_second: f64,
    },
    Pause,
    Intervene {
        intervention: Intervention,
    },
}

fn one() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
struct AvatarQuery {
    zone: Option<String>,
    #[serde(default)]
    offset: usize,
    #[serde(default = "page")]
    limit: usize,
}

fn page() -> usize {
    100
}

fn parse<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ApiError::bad_request(Error::Parse { line: inner.line(), column: inner.column(), path, message: inner.to_string() })
    })
}

async fn create_session(State(st): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse(&body)?;
    let config = match &req.scenario {
        serde_json::Value::String(name) => ScenarioConfig::bundled(name)
            .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("unknown bundled scenario `{name}`")))?,
        v @ serde_json::Value::Object(_) => ScenarioConfig::from_json(&v.to_string())?,
        _ => return Err(ApiError::bad_request("`scenario` must be a bundled name or a scenario object")),
    };
    let seed = req.seed.unwrap_or(config.run.seed);
    let id = st.next_id.fetch_add(1, Ordering::Relaxed) + 1;
    let handle = SessionHandle::spawn(id, config, seed)?;
    let status = handle.status();
    st.sessions.write().expect("sessions lock").insert(id, handle);
    Ok((StatusCode::CREATED, Json(&*status)).into_response())
}

async fn list_sessions(State(st): State<Arc<AppState>>) -> Response {
    let ids: Vec<serde_json::Value> = st
        .sessions
        .read()
        .expect("sessions lock")
        .values()
        .map(|h| {
            let s = h.status();
            serde_json::json!({ "id": s.id, "scenario": s.scenario, "seed": s.seed, "tick": s.tick })
        })
        .collect();
    Json(ids).into_response()
}

async fn delete_session(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    st.sessions
        .write()
        .expect("sessions lock")
        .remove(&id)
        .map(|_| StatusCode::NO_CONTENT)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id}")))
}

async fn control(State(st): State<Arc<AppState>>, Path(id): Path<u64>, body: Bytes) -> Result<Response, ApiError> {
    let h = st.get(id)?;
    let cmd: ControlCommand = parse(&body)?;
    let ack = match cmd {
        ControlCommand::Step { n } => h.step(n).await?,
        ControlCommand::Play { ticks_per_second } => h.play(ticks_per_second).await?,
        ControlCommand::Pause => h.pause().await?,
        ControlCommand::Intervene { intervention } => h.intervene(intervention).await?,
    };
    Ok(Json(ack).into_response())
}

async fn snapshot(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let h = st.get(id)?;
    Ok(Json(&*h.status()).into_response())
}

async fn avatars(State(st): State<Arc<AppState>>, Path(id): Path<u64>, Query(q): Query<AvatarQuery>) -> Result<Response, ApiError> {
    let h = st.get(id)?;
    let page = h.avatars(q.zone, q.offset, q.limit.min(1000)).await?;
    Ok(Json(page).into_response())
}

async fn events(State(st): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let h = st.get(id)?;
    let log = h.events().await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], to_ndjson(&log)).into_response())
}

async fn stream(State(st): State<Arc<AppState>>, Path(id): Path<u64>, ws: WebSocketUpgrade) -> Result<Response, ApiError> {
    let h = st.get(id)?;
    Ok(ws.on_upgrade(move |socket| feed(socket, h)))
}

async fn feed(mut socket: WebSocket, h: SessionHandle) {
    let (tx, mut rx) = unbounded_channel();
    if h.subscribe(tx).await.is_err() {
        return;
    }
    drop(h);
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Some(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                _ => {}
            },
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/control", post(control))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .route("/sessions/{id}/avatars", get(avatars))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(AppState::default()))).await
}
