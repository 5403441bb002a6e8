//! HTTP JSON and server-sent-event front end for one live teaching session.
//!
//! Routes:
//!
//! | method | path | |
//! |---|---|---|
//! | `POST` | `/session` | create a session from a [`CreateSession`] body |
//! | `GET` | `/session` | list session ids |
//! | `GET` | `/session/{id}/state` | latest [`SessionSnapshot`] |
//! | `POST` | `/session/{id}/start` | start a session that waits for a client |
//! | `POST` | `/session/{id}/demonstration` | answer a pending query |
//! | `POST` | `/session/{id}/correction` | answer an open correction window |
//! | `GET` | `/session/{id}/events` | event stream, resumable with `Last-Event-ID` or `?since=` |
//! | `GET` | `/session/{id}/telemetry` | decision telemetry so far, CSV |
//! | `GET` | `/session/{id}/dataset` | aggregated dataset, JSON lines |
//! | `GET` | `/` | UI entry page |

mod host;
pub mod snapshot;

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use futures_util::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

pub use crate::host::{SessionHost, SubmitError};
pub use crate::snapshot::*;

const INDEX_HTML: &str = include_str!("index.html");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    pub message: String,
}

pub struct Rejection(StatusCode, String);

impl Rejection {
    pub fn status(&self) -> StatusCode {
        self.0
    }

    pub fn message(&self) -> &str {
        &self.1
    }

    fn not_found(id: &str) -> Self {
        Rejection(StatusCode::NOT_FOUND, format!("unknown session `{id}`"))
    }
}

impl IntoResponse for Rejection {
    fn into_response(self) -> Response {
        let kind = match self.0 {
            StatusCode::NOT_FOUND => "not_found",
            StatusCode::CONFLICT => "conflict",
            StatusCode::UNPROCESSABLE_ENTITY => "validation",
            StatusCode::BAD_REQUEST => "bad_request",
            _ => "internal",
        };
        (self.0, axum::Json(ApiError { error: kind.into(), message: self.1 })).into_response()
    }
}

impl From<SubmitError> for Rejection {
    fn from(e: SubmitError) -> Self {
        match e {
            SubmitError::NotPending(m) => Rejection(StatusCode::CONFLICT, m),
            SubmitError::Invalid(m) => Rejection(StatusCode::UNPROCESSABLE_ENTITY, m),
        }
    }
}

/// JSON body whose rejections use the API's error shape.
pub struct Json<T>(pub T);

impl<S: Send + Sync, T: serde::de::DeserializeOwned> FromRequest<S> for Json<T> {
    type Rejection = Rejection;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match axum::Json::<T>::from_request(req, state).await {
            Ok(axum::Json(v)) => Ok(Json(v)),
            Err(e) => {
                let status = match e {
                    JsonRejection::JsonDataError(_) => StatusCode::UNPROCESSABLE_ENTITY,
                    _ => StatusCode::BAD_REQUEST,
                };
                Err(Rejection(status, e.body_text()))
            }
        }
    }
}

#[derive(Default)]
struct Registry {
    sessions: RwLock<BTreeMap<String, Arc<SessionHost>>>,
    next: AtomicU64,
    assets: Option<PathBuf>,
}

/// Shared state of the router. Cloning is cheap.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Registry>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Serves `index.html` from `dir` instead of the built-in page.
    pub fn with_assets(dir: impl Into<PathBuf>) -> Self {
        AppState { inner: Arc::new(Registry { assets: Some(dir.into()), ..Registry::default() }) }
    }

    pub fn session(&self, id: &str) -> Option<Arc<SessionHost>> {
        self.inner.sessions.read().unwrap().get(id).cloned()
    }

    /// Creates a session unless one is still running; the loop is
    /// sequential, so a server hosts one live session at a time.
    pub fn create(&self, request: CreateSession) -> Result<Arc<SessionHost>, Rejection> {
        let mut sessions = self.inner.sessions.write().unwrap();
        if let Some(active) = sessions.values().find(|s| s.snapshot().status.is_active()) {
            return Err(Rejection(StatusCode::CONFLICT, format!("session `{}` is still active", active.id())));
        }
        let id = format!("s{}", self.inner.next.fetch_add(1, Ordering::SeqCst) + 1);
        let host = SessionHost::spawn(id.clone(), request)
            .map_err(|e| Rejection(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        sessions.insert(id, host.clone());
        Ok(host)
    }

    /// Stops every session loop.
    pub fn shutdown(&self) {
        for s in self.inner.sessions.read().unwrap().values() {
            s.stop();
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/session", post(create_session).get(list_sessions))
        .route("/session/{id}/state", get(get_state))
        .route("/session/{id}/start", post(start_session))
        .route("/session/{id}/demonstration", post(post_demonstration))
        .route("/session/{id}/correction", post(post_correction))
        .route("/session/{id}/events", get(stream_events))
        .route("/session/{id}/telemetry", get(get_telemetry))
        .route("/session/{id}/dataset", get(get_dataset))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then stops the session loops.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(state.clone());
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    state.shutdown();
    result
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr).await
}

fn lookup(state: &AppState, id: &str) -> Result<Arc<SessionHost>, Rejection> {
    state.session(id).ok_or_else(|| Rejection::not_found(id))
}

async fn index(State(state): State<AppState>) -> Response {
    if let Some(dir) = &state.inner.assets {
        match std::fs::read_to_string(dir.join("index.html")) {
            Ok(page) => return Html(page).into_response(),
            Err(e) => return Rejection(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
        }
    }
    Html(INDEX_HTML).into_response()
}

async fn create_session(
    State(state): State<AppState>,
    Json(request): Json<CreateSession>,
) -> Result<(StatusCode, axum::Json<SessionSnapshot>), Rejection> {
    let host = state.create(request)?;
    Ok((StatusCode::CREATED, axum::Json(SessionSnapshot::clone(&host.snapshot()))))
}

async fn list_sessions(State(state): State<AppState>) -> axum::Json<Vec<String>> {
    axum::Json(state.inner.sessions.read().unwrap().keys().cloned().collect())
}

async fn get_state(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, Rejection> {
    let snap = lookup(&state, &id)?.snapshot();
    Ok(axum::Json(&*snap).into_response())
}

async fn start_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, Rejection> {
    lookup(&state, &id)?.start();
    Ok(StatusCode::NO_CONTENT)
}

async fn post_demonstration(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(post): Json<DemonstrationPost>,
) -> Result<axum::Json<Ack>, Rejection> {
    Ok(axum::Json(lookup(&state, &id)?.submit_demonstration(&post)?))
}

async fn post_correction(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(post): Json<CorrectionPost>,
) -> Result<axum::Json<Ack>, Rejection> {
    Ok(axum::Json(lookup(&state, &id)?.submit_correction(&post)?))
}

async fn get_telemetry(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, Rejection> {
    let body = lookup(&state, &id)?.telemetry_csv();
    Ok(([(header::CONTENT_TYPE, "text/csv")], body).into_response())
}

async fn get_dataset(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, Rejection> {
    let body = lookup(&state, &id)?.dataset_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    since: Option<u64>,
}

fn sse_event(e: &EventEnvelope) -> Event {
    Event::default().id(e.version.to_string()).event(e.kind.as_str()).json_data(e).expect("envelopes serialize")
}

/// Replays logged events after the resume point, then follows the live
/// channel. A lagging receiver is refilled from the log, so versions
/// arrive without gaps.
async fn stream_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, Rejection> {
    let host = lookup(&state, &id)?;
    let since = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse().ok())
        .or(q.since)
        .unwrap_or(0);
    let (backlog, rx) = host.subscribe(since);
    host.start();
    let last = backlog.last().map_or(since, |e| e.version);
    let init = (backlog.into_iter().collect::<std::collections::VecDeque<_>>(), rx, last, host);
    let events = stream::unfold(init, |(mut queue, mut rx, mut last, host)| async move {
        loop {
            if let Some(e) = queue.pop_front() {
                last = e.version;
                return Some((Ok(sse_event(&e)), (queue, rx, last, host)));
            }
            match rx.recv().await {
                Ok(e) if e.version > last => queue.push_back(e),
                Ok(_) => {}
                Err(RecvError::Lagged(_)) => queue.extend(host.events_since(last)),
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}
