//! HTTP service over clarification sessions and batch runs.
//!
//! Every error body is `{"code": ..., "message": ...}`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use disambig::eval::EvalReport;
use disambig::orchestrator::{run_config, ClarifySession, Method, RunConfig, SessionStore};
use disambig::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation_error"),
            Error::Config(_) | Error::Parse { .. } | Error::Fingerprint { .. } => {
                (StatusCode::BAD_REQUEST, "config_error")
            }
            Error::Io { .. } => (StatusCode::BAD_REQUEST, "io_error"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Debug, Clone)]
enum RunStatus {
    Running,
    Done { report: Box<EvalReport> },
    Failed { message: String },
}

pub struct AppState {
    sessions: Arc<SessionStore>,
    runs: Mutex<HashMap<String, RunStatus>>,
    next_run: AtomicUsize,
}

impl AppState {
    pub fn new(sessions: SessionStore) -> Arc<Self> {
        Arc::new(Self {
            sessions: Arc::new(sessions),
            runs: Mutex::new(HashMap::new()),
            next_run: AtomicUsize::new(1),
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/clarify", post(clarify))
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/choose", post(choose))
        .route("/runs", post(start_run))
        .route("/runs/{id}/report", get(run_report))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> disambig::Result<T> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Debug, Deserialize)]
struct ClarifyRequest {
    query: String,
}

async fn clarify(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ClarifyRequest>, JsonRejection>,
) -> ApiResult<ClarifySession> {
    let Json(req) = body?;
    let store = state.sessions.clone();
    Ok(Json(blocking(move || store.start_session(&req.query)).await?))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<ClarifySession> {
    Ok(Json(state.sessions.get_session(&id)?))
}

#[derive(Debug, Deserialize)]
struct ChooseRequest {
    index: usize,
}

#[derive(Debug, Serialize)]
struct ChooseResponse {
    answer: String,
    passage_id: String,
    snippet: String,
    interpretation: String,
}

async fn choose(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ChooseRequest>, JsonRejection>,
) -> ApiResult<ChooseResponse> {
    let Json(req) = body?;
    let c = state.sessions.choose(&id, req.index)?;
    Ok(Json(ChooseResponse {
        answer: c.answer,
        passage_id: c.passage_id,
        snippet: c.snippet,
        interpretation: c.interpretation,
    }))
}

#[derive(Debug, Deserialize)]
struct RunRequest {
    /// Path of a run config file on the server.
    config: PathBuf,
    #[serde(default)]
    method: Option<Method>,
}

#[derive(Debug, Serialize)]
struct RunCreated {
    run_id: String,
}

async fn start_run(
    State(state): State<Arc<AppState>>,
    body: Result<Json<RunRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<RunCreated>), ApiError> {
    let Json(req) = body?;
    let mut config = RunConfig::load(&req.config)?;
    if let Some(m) = req.method {
        config.method = m;
    }
    if config.paths.gold.is_none() {
        return Err(Error::Config("batch runs need `paths.gold`".into()).into());
    }
    let run_id = format!("run-{:04}", state.next_run.fetch_add(1, Ordering::SeqCst));
    state
        .runs
        .lock()
        .expect("runs poisoned")
        .insert(run_id.clone(), RunStatus::Running);
    let id = run_id.clone();
    let st = state.clone();
    tokio::spawn(async move {
        let status = match blocking(move || run_config(config)).await {
            Ok(report) => RunStatus::Done {
                report: Box::new(report),
            },
            Err(e) => RunStatus::Failed { message: e.message },
        };
        st.runs.lock().expect("runs poisoned").insert(id, status);
    });
    Ok((StatusCode::ACCEPTED, Json(RunCreated { run_id })))
}

async fn run_report(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<EvalReport>, ApiError> {
    let runs = state.runs.lock().expect("runs poisoned");
    match runs.get(&id) {
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("run `{id}`"))),
        Some(RunStatus::Running) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "run_pending",
            format!("run `{id}` is still running"),
        )),
        Some(RunStatus::Failed { message }) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "run_failed",
            message.clone(),
        )),
        Some(RunStatus::Done { report }) => Ok(Json((**report).clone())),
    }
}
