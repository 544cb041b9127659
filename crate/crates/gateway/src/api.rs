use std::convert::Infallible;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{Stream, StreamExt};
use homelearn_core::events::{EngineEvent, FeedbackRequest};
use homelearn_core::world::JointState;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::oneshot;

use crate::host::{Command, FeedbackRejection, Phase, RunMode, Shared};

#[derive(Clone)]
pub struct AppState {
    pub shared: Arc<Shared>,
    pub commands: mpsc::Sender<Command>,
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn conflict(msg: &str) -> ApiError {
    ApiError(StatusCode::CONFLICT, msg.to_owned())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/state", get(get_state))
        .route("/api/qtable", get(get_qtable))
        .route("/api/run/status", get(get_status))
        .route("/api/run/start", post(start_run))
        .route("/api/run/step", post(step_run))
        .route("/api/feedback", post(post_feedback))
        .route("/api/events", get(events))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StateView {
    pub state: JointState,
    pub step: u32,
    pub episode: u32,
    pub epsilon: f64,
}

async fn get_state(State(app): State<AppState>) -> Json<StateView> {
    let snap = app.shared.snapshot.lock().unwrap();
    Json(StateView {
        state: snap.state.clone(),
        step: snap.step,
        episode: snap.episode,
        epsilon: snap.epsilon,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QTableView {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

async fn get_qtable(State(app): State<AppState>) -> Json<QTableView> {
    let scenario = &app.shared.scenario;
    let cols = scenario.vocab.len();
    let values = app.shared.snapshot.lock().unwrap().values.clone();
    Json(QTableView {
        states: scenario.space.states().map(|s| s.key()).collect(),
        actions: scenario.vocab.names(),
        values: values.chunks(cols).map(<[f64]>::to_vec).collect(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatusView {
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending_feedback: Option<FeedbackRequest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<RunMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

async fn get_status(State(app): State<AppState>) -> Json<StatusView> {
    let pending_feedback = app.shared.pending_feedback();
    let status = app.shared.status.lock().unwrap();
    let phase = match (status.phase, &pending_feedback) {
        (Phase::Running, Some(_)) => Phase::WaitingFeedback,
        (p, _) => p,
    };
    Json(StatusView {
        phase,
        pending_feedback,
        mode: status.mode,
        error: status.error.clone(),
    })
}

#[derive(Debug, Deserialize)]
pub struct StartRequest {
    pub mode: RunMode,
    /// Pause between steps in auto mode.
    #[serde(default)]
    pub delay_ms: u64,
}

async fn start_run(State(app): State<AppState>, Json(req): Json<StartRequest>) -> Result<Json<serde_json::Value>, ApiError> {
    {
        let mut status = app.shared.status.lock().unwrap();
        if status.phase != Phase::Idle {
            return Err(conflict("a run has already been started"));
        }
        status.phase = Phase::Running;
        status.mode = Some(req.mode);
    }
    app.commands
        .send(Command::Start {
            mode: req.mode,
            delay: Duration::from_millis(req.delay_ms),
        })
        .map_err(|_| ApiError(StatusCode::SERVICE_UNAVAILABLE, "engine stopped".into()))?;
    Ok(Json(json!({ "phase": Phase::Running, "mode": req.mode })))
}

async fn step_run(State(app): State<AppState>) -> Result<Json<Vec<EngineEvent>>, ApiError> {
    {
        let mut status = app.shared.status.lock().unwrap();
        if status.mode != Some(RunMode::Manual) {
            return Err(conflict("stepping requires a run started in manual mode"));
        }
        if status.phase == Phase::Done {
            return Err(conflict("run finished"));
        }
        if status.step_in_flight {
            return Err(conflict("a step is already in progress"));
        }
        status.step_in_flight = true;
    }
    let (tx, rx) = oneshot::channel();
    let stopped = || ApiError(StatusCode::SERVICE_UNAVAILABLE, "engine stopped".into());
    app.commands.send(Command::Step(tx)).map_err(|_| stopped())?;
    match rx.await.map_err(|_| stopped())? {
        Ok(events) => Ok(Json(events)),
        Err(msg) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, msg)),
    }
}

#[derive(Debug, Deserialize)]
pub struct FeedbackBody {
    pub request_id: u64,
    pub action: String,
}

async fn post_feedback(State(app): State<AppState>, Json(body): Json<FeedbackBody>) -> Result<Json<serde_json::Value>, ApiError> {
    match app.shared.resolve_feedback(body.request_id, &body.action) {
        Ok(()) => Ok(Json(json!({ "request_id": body.request_id, "action": body.action }))),
        Err(FeedbackRejection::Unknown) => Err(ApiError(StatusCode::NOT_FOUND, "no such feedback request".into())),
        Err(FeedbackRejection::Gone) => Err(ApiError(StatusCode::GONE, "feedback request is no longer open".into())),
        Err(FeedbackRejection::Invalid) => Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("action `{}` was not offered", body.action),
        )),
    }
}

#[derive(Debug, Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub from: u64,
}

async fn events(
    State(app): State<AppState>,
    Query(q): Query<EventsQuery>,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let stream = app.shared.bus.subscribe(q.from).map(|ev| {
        let data = serde_json::to_string(&ev).expect("events serialize");
        Ok(Event::default()
            .id(ev.seq.to_string())
            .event(ev.body.kind())
            .data(data))
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}
