//! JSON-over-HTTP front end of [`GameService`].
//!
//! ```text
//! POST /api/sessions                {group_policy, policy_seed?, seed?, player_meta?}
//! POST /api/sessions/{id}/rounds    -> {round_id, round_index, target_id, target_image, emotion?, attempts_remaining}
//! POST /api/rounds/{id}/attempts    {frame, landmarks, captured_at}
//! GET  /api/sessions/{id}/history
//! GET  /api/targets
//! POST /api/targets                 {target_id?, image, landmarks, emotion}
//! ```
//!
//! Images travel as base64. `captured_at` is epoch milliseconds or an
//! RFC 3339 string. Errors come back as `{"error": code, "message": text}`.

use std::future::Future;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::explain::Prescription;
use crate::model::{AuSet, Emotion, GrayImage, Group, LandmarkSet};

use super::service::{
    AttemptResult, AttemptSubmission, GameService, GroupPolicy, RoundStatus, RoundSummary,
};
use super::GameError;

const MAX_BODY_BYTES: usize = 32 * 1024 * 1024;

type Shared = State<Arc<GameService>>;

impl GameError {
    fn status(&self) -> StatusCode {
        match self {
            GameError::UnknownSession(_) | GameError::UnknownRound(_) => StatusCode::NOT_FOUND,
            GameError::SessionComplete(_)
            | GameError::RoundExhausted(_)
            | GameError::RoundClosed(_)
            | GameError::NoTargetForEmotion(_)
            | GameError::NoTargets => StatusCode::CONFLICT,
            GameError::EmptyTargetAuSet(_)
            | GameError::Pipeline(_)
            | GameError::InvalidRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
            GameError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            GameError::UnknownSession(_) => "unknown_session",
            GameError::UnknownRound(_) => "unknown_round",
            GameError::SessionComplete(_) => "session_complete",
            GameError::RoundExhausted(_) => "round_exhausted",
            GameError::RoundClosed(_) => "round_closed",
            GameError::NoTargetForEmotion(_) => "no_target_for_emotion",
            GameError::NoTargets => "no_targets",
            GameError::EmptyTargetAuSet(_) => "empty_target_au_set",
            GameError::Pipeline(_) => "pipeline_error",
            GameError::InvalidRequest(_) => "invalid_request",
            GameError::Storage(_) => "storage_error",
        }
    }
}

impl IntoResponse for GameError {
    fn into_response(self) -> Response {
        let body = json!({"error": self.code(), "message": self.to_string()});
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    /// `alternating`, `seeded-random`, `control` or `treatment`.
    group_policy: String,
    #[serde(default)]
    policy_seed: Option<u64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    player_meta: Option<Value>,
}

fn parse_policy(req: &CreateSession) -> Result<GroupPolicy, GameError> {
    match req.group_policy.trim().to_ascii_lowercase().as_str() {
        "alternating" => Ok(GroupPolicy::Alternating),
        "seeded-random" | "random" => Ok(GroupPolicy::SeededRandom(req.policy_seed.unwrap_or(0))),
        other => other
            .parse::<Group>()
            .map(GroupPolicy::Explicit)
            .map_err(|_| {
                GameError::InvalidRequest(format!("unknown group policy {:?}", req.group_policy))
            }),
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Timestamp {
    Millis(i64),
    Text(DateTime<Utc>),
}

impl Timestamp {
    fn resolve(self) -> Result<DateTime<Utc>, GameError> {
        match self {
            Timestamp::Millis(ms) => DateTime::from_timestamp_millis(ms)
                .ok_or_else(|| GameError::InvalidRequest(format!("timestamp {ms} out of range"))),
            Timestamp::Text(t) => Ok(t),
        }
    }
}

#[derive(Debug, Deserialize)]
struct SubmitAttempt {
    frame: String,
    landmarks: LandmarkSet,
    captured_at: Timestamp,
}

#[derive(Debug, Deserialize)]
struct IngestTarget {
    #[serde(default)]
    target_id: Option<String>,
    image: String,
    landmarks: LandmarkSet,
    emotion: Emotion,
}

/// Attempt result as sent to the client. The per-unit breakdown reveals
/// the target set, so it is only included once the round is over.
#[derive(Debug, Serialize)]
struct AttemptPayload {
    record_id: u64,
    round_id: String,
    attempt_index: u32,
    score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    correct: Option<AuSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spurious: Option<AuSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    missing: Option<AuSet>,
    prescriptions: Vec<Prescription>,
    retry_allowed: bool,
    attempts_remaining: u32,
    status: RoundStatus,
}

impl From<AttemptResult> for AttemptPayload {
    fn from(r: AttemptResult) -> Self {
        let over = r.status != RoundStatus::Open;
        AttemptPayload {
            record_id: r.record_id,
            round_id: r.round_id,
            attempt_index: r.attempt_index,
            score: r.score,
            correct: over.then_some(r.correct),
            spurious: over.then_some(r.spurious),
            missing: over.then_some(r.missing),
            prescriptions: r.prescriptions,
            retry_allowed: r.retry_allowed,
            attempts_remaining: r.attempts_remaining,
            status: r.status,
        }
    }
}

fn history_payload(rounds: Vec<RoundSummary>) -> Value {
    let rounds: Vec<Value> = rounds
        .into_iter()
        .map(|r| {
            let over = r.status != RoundStatus::Open;
            let attempts: Vec<Value> = r
                .records
                .iter()
                .map(|rec| {
                    json!({
                        "record_id": rec.record_id,
                        "attempt_index": rec.attempt_index,
                        "score": rec.score,
                        "player_aus": rec.player_aus,
                        "prescriptions_shown": rec.prescriptions_shown,
                        "captured_at": rec.captured_at,
                        "received_at": rec.received_at,
                    })
                })
                .collect();
            let mut round = json!({
                "round_id": r.round_id,
                "round_index": r.round_index,
                "target_id": r.target_id,
                "emotion": r.emotion,
                "status": r.status,
                "scores": r.records.iter().map(|rec| rec.score).collect::<Vec<_>>(),
                "attempts": attempts,
            });
            if over {
                round["target_aus"] = json!(r.target_aus);
            }
            round
        })
        .collect();
    json!({ "rounds": rounds })
}

fn decode_b64(field: &str, text: &str) -> Result<Vec<u8>, GameError> {
    base64::engine::general_purpose::STANDARD
        .decode(text.trim())
        .map_err(|e| GameError::InvalidRequest(format!("{field} is not valid base64: {e}")))
}

/// Runs blocking service work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, GameError> + Send + 'static,
) -> Result<T, GameError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| GameError::Storage(format!("worker failed: {e}")))?
}

async fn create_session(
    State(svc): Shared,
    Json(req): Json<CreateSession>,
) -> Result<Json<Value>, GameError> {
    let policy = parse_policy(&req)?;
    let info = blocking(move || svc.create_session(policy, req.seed, req.player_meta)).await?;
    Ok(Json(
        json!({"session_id": info.session_id, "group": info.group}),
    ))
}

async fn start_round(State(svc): Shared, Path(id): Path<String>) -> Result<Response, GameError> {
    let view = blocking(move || svc.start_round(&id)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn submit_attempt(
    State(svc): Shared,
    Path(id): Path<String>,
    Json(req): Json<SubmitAttempt>,
) -> Result<Json<AttemptPayload>, GameError> {
    let submission = AttemptSubmission {
        frame: decode_b64("frame", &req.frame)?,
        landmarks: req.landmarks,
        captured_at: req.captured_at.resolve()?,
    };
    let result = blocking(move || svc.submit_attempt(&id, submission)).await?;
    Ok(Json(result.into()))
}

async fn history(State(svc): Shared, Path(id): Path<String>) -> Result<Json<Value>, GameError> {
    let rounds = svc.session_history(&id)?;
    Ok(Json(history_payload(rounds)))
}

fn target_json(t: &crate::model::TargetEntry) -> Value {
    json!({
        "target_id": t.target_id,
        "emotion": t.emotion,
        "au_set": t.au_set,
        "asset_ref": t.asset_ref,
    })
}

async fn list_targets(State(svc): Shared) -> Json<Value> {
    let targets: Vec<Value> = svc.targets().iter().map(|t| target_json(t)).collect();
    Json(json!({ "targets": targets }))
}

async fn add_target(
    State(svc): Shared,
    Json(req): Json<IngestTarget>,
) -> Result<Response, GameError> {
    let bytes = decode_b64("image", &req.image)?;
    let image = GrayImage::decode(&bytes).map_err(|e| GameError::InvalidRequest(e.to_string()))?;
    let entry =
        blocking(move || svc.ingest_target(req.target_id, image, req.landmarks, req.emotion))
            .await?;
    Ok((StatusCode::CREATED, Json(target_json(&entry))).into_response())
}

pub fn router(service: Arc<GameService>) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/rounds", post(start_round))
        .route("/api/sessions/{id}/history", get(history))
        .route("/api/rounds/{id}/attempts", post(submit_attempt))
        .route("/api/targets", get(list_targets).post(add_target))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(service)
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Arc<GameService>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}
