//! `/v1` session API.
//!
//! | method | path | body | response |
//! |--------|------|------|----------|
//! | POST | `/v1/sessions` | `{policy, scenario?, question, history?}` | 201 session |
//! | GET | `/v1/sessions/{id}` | | 200 session |
//! | POST | `/v1/sessions/{id}/answers` | `{answer: "yes" \| "no"}` | 200 session |
//!
//! Errors are `{"error": ..., "stage"?: ...}` with 400 for invalid bodies
//! or input, 404 for unknown sessions, 409 when no follow-up is pending
//! and 500 for pipeline failures.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use policylogic::pipeline::{FollowUp, PipelineError, SessionError, Stage};
use policylogic::{CaseInput, ChatTurn, DecisionKind, DecisionTrace, Engine, Session, SessionStatus, YesNo};
use serde::{Deserialize, Serialize};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub policy: String,
    #[serde(default)]
    pub scenario: String,
    pub question: String,
    #[serde(default)]
    pub history: Vec<ChatTurn>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerBody {
    pub answer: YesNo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionView {
    pub kind: DecisionKind,
    pub follow_up: Option<FollowUp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub state: SessionStatus,
    pub decision: DecisionView,
    pub trace: DecisionTrace,
    pub history: Vec<ChatTurn>,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        SessionView {
            session_id: s.id.clone(),
            state: s.status,
            decision: DecisionView {
                kind: s.decision.kind,
                follow_up: s.decision.follow_up.clone(),
            },
            trace: s.decision.trace.clone(),
            history: s.history.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<Stage>,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: error.into(),
                stage: None,
            },
        }
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, format!("no session {id:?}"))
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = if e.stage == Stage::Input {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        ApiError {
            status,
            body: ErrorBody {
                error: e.to_string(),
                stage: Some(e.stage),
            },
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::NotAwaiting(_) => ApiError::new(StatusCode::CONFLICT, e.to_string()),
            SessionError::Pipeline(p) => p.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type Slot = Arc<tokio::sync::Mutex<Session>>;

/// Shared service state. Each session sits behind its own async lock so
/// operations on one session are serialized while others proceed.
pub struct AppState {
    engine: Arc<Engine>,
    sessions: Mutex<HashMap<String, Slot>>,
    next_id: AtomicU64,
    sessions_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(engine: Engine) -> Self {
        AppState {
            engine: Arc::new(engine),
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            sessions_dir: None,
        }
    }

    /// Persists sessions as `<dir>/<id>.json` and loads any already there.
    pub fn with_sessions_dir(mut self, dir: PathBuf) -> std::io::Result<Self> {
        std::fs::create_dir_all(&dir)?;
        let mut highest = 0;
        {
            let mut sessions = self.sessions.lock().expect("session map lock");
            for entry in std::fs::read_dir(&dir)? {
                let path = entry?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let session: Session = serde_json::from_str(&std::fs::read_to_string(&path)?)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
                if let Some(n) = session.id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                    highest = highest.max(n);
                }
                sessions.insert(session.id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
            }
        }
        self.next_id = AtomicU64::new(highest + 1);
        self.sessions_dir = Some(dir);
        Ok(self)
    }

    fn slot(&self, id: &str) -> Option<Slot> {
        self.sessions.lock().expect("session map lock").get(id).cloned()
    }

    fn persist(&self, session: &Session) {
        let Some(dir) = &self.sessions_dir else { return };
        let path = dir.join(format!("{}.json", session.id));
        let body = serde_json::to_vec_pretty(session).expect("sessions serialize");
        if let Err(e) = std::fs::write(&path, body) {
            tracing::error!(path = %path.display(), error = %e, "cannot persist session");
        }
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid request body: {e}")))
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let case = CaseInput::new(req.policy, req.question)
        .with_scenario(req.scenario)
        .with_history(req.history);
    let engine = state.engine.clone();
    let mut session = tokio::task::spawn_blocking(move || engine.start_session("", case))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    // IDs are only handed out to sessions that started successfully.
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::SeqCst));
    session.id = id.clone();
    tracing::info!(session = %id, state = ?session.status, "session created");
    state.persist(&session);
    let view = SessionView::from(&session);
    state
        .sessions
        .lock()
        .expect("session map lock")
        .insert(id, Arc::new(tokio::sync::Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let slot = state.slot(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let session = slot.lock().await;
    Ok(Json(SessionView::from(&*session)))
}

async fn answer(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let slot = state.slot(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let req: AnswerBody = parse_body(&body)?;
    let mut guard = slot.lock_owned().await;
    let current = guard.clone();
    let engine = state.engine.clone();
    let next = tokio::task::spawn_blocking(move || engine.answer_follow_up(&current, req.answer))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    tracing::info!(session = %id, state = ?next.status, "answer recorded");
    state.persist(&next);
    *guard = next;
    Ok(Json(SessionView::from(&*guard)))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no such route")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/:id", get(get_session))
        .route("/v1/sessions/:id/answers", post(answer))
        .fallback(fallback)
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
