//! HTTP front end for sessions.
//!
//! Agent-facing routes return only what a subject may see: prompt, choices
//! and an image URL. The answer key is served only by the operator report.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use qualia_core::inference::TestConfig;
use qualia_core::items::InstanceRegistry;
use qualia_core::session::{new_session_id, FileSink, Outcome, Session, SessionError, SessionSnapshot};
use qualia_core::stimulus::render;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub data_dir: PathBuf,
    pub defaults: TestConfig,
    pub global_registry: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("qualia-data"),
            defaults: TestConfig::default(),
            global_registry: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("storage: {0}")]
    Storage(String),
    #[error("cannot bind {0}: {1}")]
    Bind(String, String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

type SharedSession = Arc<Mutex<Session>>;

pub struct AppState {
    sessions: Mutex<HashMap<String, SharedSession>>,
    /// item_id to owning session, for image requests.
    items: Mutex<HashMap<String, String>>,
    registry: Arc<InstanceRegistry>,
    session_dir: PathBuf,
    defaults: TestConfig,
}

fn sessions_dir(data_dir: &Path) -> PathBuf {
    data_dir.join("sessions")
}

/// Reads a log and cuts off a partial final line so later appends start on a
/// fresh line.
fn drop_torn_tail(path: &Path) -> Result<String, ServiceError> {
    let storage = |e: std::io::Error| ServiceError::Storage(format!("{}: {e}", path.display()));
    let mut text = std::fs::read_to_string(path).map_err(storage)?;
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        text.truncate(keep);
        let file = std::fs::OpenOptions::new().write(true).open(path).map_err(storage)?;
        file.set_len(keep as u64).map_err(storage)?;
    }
    Ok(text)
}

impl AppState {
    /// Opens the data directory and replays every session log in it.
    pub fn open(cfg: &ServiceConfig) -> Result<Arc<AppState>, ServiceError> {
        cfg.defaults.validate().map_err(|e| ServiceError::Session(e.into()))?;
        let dir = sessions_dir(&cfg.data_dir);
        std::fs::create_dir_all(&dir).map_err(|e| ServiceError::Storage(format!("{}: {e}", dir.display())))?;
        let registry = Arc::new(
            InstanceRegistry::open(cfg.data_dir.join("registry.jsonl"), cfg.global_registry)
                .map_err(|e| ServiceError::Storage(e.to_string()))?,
        );
        let mut sessions = HashMap::new();
        let mut items = HashMap::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| ServiceError::Storage(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let text = drop_torn_tail(&path)?;
            let session = Session::replay(text.as_bytes(), registry.clone(), Box::new(FileSink::open(&path)?))?;
            for issued in session.issued() {
                items.insert(issued.item.item_id.clone(), session.session_id().to_string());
            }
            sessions.insert(session.session_id().to_string(), Arc::new(Mutex::new(session)));
        }
        Ok(Arc::new(AppState {
            sessions: Mutex::new(sessions),
            items: Mutex::new(items),
            registry,
            session_dir: dir,
            defaults: cfg.defaults.clone(),
        }))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn session(&self, id: &str) -> Result<SharedSession, ApiError> {
        self.sessions.lock().unwrap().get(id).cloned().ok_or(ApiError::NotFound("session"))
    }
}

enum ApiError {
    NotFound(&'static str),
    Session(SessionError),
    BadRequest(String),
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::Session(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::NotFound(what) => (StatusCode::NOT_FOUND, format!("unknown {what}")),
            ApiError::BadRequest(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Session(e) => {
                let status = match &e {
                    SessionError::ConfigInvalid(_) | SessionError::IndexOutOfRange { .. } => {
                        StatusCode::UNPROCESSABLE_ENTITY
                    }
                    SessionError::OutOfOrder(_) | SessionError::UnknownItem(_) => StatusCode::CONFLICT,
                    SessionError::NoveltyExhausted { .. } => StatusCode::SERVICE_UNAVAILABLE,
                    _ => StatusCode::INTERNAL_SERVER_ERROR,
                };
                (status, e.to_string())
            }
        };
        (status, Json(json!({ "error": msg }))).into_response()
    }
}

#[derive(Deserialize)]
struct CreateRequest {
    subject_id: String,
    #[serde(default)]
    overrides: Option<Value>,
}

#[derive(Deserialize)]
struct AnswerRequest {
    item_id: String,
    choice: usize,
    #[serde(default)]
    latency_ms: u64,
}

/// What an agent sees of an item.
#[derive(Serialize)]
struct ItemView {
    item_id: String,
    prompt: String,
    choices: Vec<String>,
    image_url: String,
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CreateRequest>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let mut config = state.defaults.clone();
    if let Some(patch) = req.overrides {
        let mut v = serde_json::to_value(&config).expect("config serializes");
        merge(&mut v, patch);
        config = serde_json::from_value(v).map_err(|e| ApiError::BadRequest(format!("overrides: {e}")))?;
    }
    if req.subject_id.trim().is_empty() {
        return Err(ApiError::BadRequest("subject_id is empty".into()));
    }
    let id = new_session_id();
    let sink = FileSink::open(FileSink::log_path(&state.session_dir, &id))?;
    let session = Session::create_with_id(&id, &req.subject_id, config, state.registry.clone(), Box::new(sink));
    let session = match session {
        Ok(s) => s,
        Err(e) => {
            let _ = std::fs::remove_file(FileSink::log_path(&state.session_dir, &id));
            return Err(e.into());
        }
    };
    state.sessions.lock().unwrap().insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn next_item(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let shared = state.session(&id)?;
    let mut session = shared.lock().unwrap();
    if session.state() == qualia_core::SessionState::Closed {
        return Ok((StatusCode::GONE, Json(json!({ "error": "session is closed" }))).into_response());
    }
    let item = session.next_item_unrendered()?;
    state.items.lock().unwrap().insert(item.item_id.clone(), id.clone());
    let view = ItemView {
        image_url: format!("/v1/items/{}/image.png", item.item_id),
        choices: item.choice_texts(),
        prompt: item.prompt,
        item_id: item.item_id,
    };
    Ok(Json(view).into_response())
}

async fn item_image(
    State(state): State<Arc<AppState>>,
    UrlPath(item_id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let session_id = state.items.lock().unwrap().get(&item_id).cloned().ok_or(ApiError::NotFound("item"))?;
    let spec = {
        let shared = state.session(&session_id)?;
        let session = shared.lock().unwrap();
        session.find_issued(&item_id).ok_or(ApiError::NotFound("item"))?.spec.clone()
    };
    let png = render(&spec)
        .and_then(|r| r.to_png())
        .map_err(|e| ApiError::Session(SessionError::from(e)))?;
    Ok(([(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "public, max-age=31536000, immutable")], png)
        .into_response())
}

async fn submit_answer(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<AnswerRequest>,
) -> Result<Json<Value>, ApiError> {
    let shared = state.session(&id)?;
    let mut session = shared.lock().unwrap();
    match session.submit_answer(&req.item_id, Some(req.choice), req.latency_ms)? {
        Outcome::Continue => Ok(Json(json!({ "status": "continue" }))),
        Outcome::Verdict(v) => Ok(Json(json!({
            "status": "verdict",
            "label": v.label,
            "posterior": v.posterior.probs,
            "p_value": v.p_value,
            "n_items": v.n_items,
        }))),
    }
}

async fn report(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionSnapshot>, ApiError> {
    let shared = state.session(&id)?;
    let snapshot = shared.lock().unwrap().snapshot();
    Ok(Json(snapshot))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/next", get(next_item))
        .route("/v1/sessions/{id}/answers", post(submit_answer))
        .route("/v1/sessions/{id}/report", get(report))
        .route("/v1/items/{id}/image.png", get(item_image))
        .with_state(state)
}

pub async fn serve(cfg: ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::open(&cfg)?;
    let addr = format!("{}:{}", cfg.bind, cfg.port);
    let parsed: SocketAddr = addr.parse().map_err(|e| ServiceError::Bind(addr.clone(), format!("{e}")))?;
    let listener = tokio::net::TcpListener::bind(parsed)
        .await
        .map_err(|e| ServiceError::Bind(addr.clone(), e.to_string()))?;
    eprintln!("listening on http://{addr} ({} sessions restored)", state.session_count());
    axum::serve(listener, router(state)).await.map_err(|e| ServiceError::Storage(e.to_string()))
}
