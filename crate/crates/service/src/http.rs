//! JSON HTTP API for the interactive study loop.
//!
//! | method | path                      | body                 |
//! |--------|---------------------------|----------------------|
//! | POST   | /sessions                 | none                 |
//! | GET    | /personas                 |                      |
//! | POST   | /stories                  | [`StoryRequest`]     |
//! | GET    | /stories/{id}             |                      |
//! | GET    | /stories/{id}/reflection  |                      |
//! | POST   | /evaluations              | `EvaluationResponse` |
//! | POST   | /post-study               | `PostStudyResponse`  |
//! | GET    | /report                   |                      |
//! | GET    | /report/{table}           | (returns CSV)        |
//!
//! Story views never carry reflection data; reflections are served only by
//! the dedicated reflection endpoint.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use reflective_core::analysis::render_table;
use reflective_core::argument_mining::ReflectionReport;
use reflective_core::argumentation::DialogueType;
use reflective_core::evaluation::{EvaluationResponse, PostStudyResponse};
use reflective_core::generation::CreativityLevel;
use reflective_core::user_model::Activity;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{Engine, EngineError};
use crate::store::{ReflectionStatus, StoreError, StoryRecord};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, kind, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.kind, "message": self.message}))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, kind) = match &e {
            StoreError::NotFound { .. } => (StatusCode::NOT_FOUND, "not_found"),
            StoreError::ConflictingId(_) => (StatusCode::CONFLICT, "conflicting_id"),
            StoreError::DuplicateEvaluation { .. } => (StatusCode::CONFLICT, "duplicate_evaluation"),
            StoreError::DuplicatePostStudy(_) => (StatusCode::CONFLICT, "duplicate_post_study"),
            StoreError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation_error"),
            StoreError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_error"),
        };
        ApiError::new(status, kind, e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Store(s) => s.into(),
            EngineError::UnknownPersona(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", e.to_string()),
            EngineError::Plan(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "plan_error", e.to_string()),
            EngineError::Generation(_) => ApiError::new(StatusCode::BAD_GATEWAY, "generation_error", e.to_string()),
            EngineError::Analysis(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "analysis_error", e.to_string())
            }
        }
    }
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

type AppState = Arc<Engine>;

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/personas", get(list_personas))
        .route("/stories", post(request_story))
        .route("/stories/{id}", get(get_story))
        .route("/stories/{id}/reflection", get(get_reflection))
        .route("/evaluations", post(submit_evaluation))
        .route("/post-study", post(submit_post_study))
        .route("/report", get(get_report))
        .route("/report/{table}", get(get_report_table))
        .with_state(engine)
}

/// Runs blocking store or model work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(join_error)?
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_token: String,
}

async fn create_session(State(engine): State<AppState>) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let token = blocking(move || Ok(engine.store().create_session()?)).await?;
    Ok((StatusCode::CREATED, Json(SessionCreated { session_token: token })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PersonaView {
    pub id: String,
    pub label: String,
    pub descriptors: Option<String>,
    pub activities: Vec<Activity>,
}

async fn list_personas(State(engine): State<AppState>) -> Json<Vec<PersonaView>> {
    Json(
        engine
            .personas()
            .iter()
            .map(|p| PersonaView {
                id: p.id.clone(),
                label: p.label.clone(),
                descriptors: p.descriptors.clone(),
                activities: p.activities_by_id().into_iter().cloned().collect(),
            })
            .collect(),
    )
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StoryRequest {
    #[serde(default)]
    pub session_token: Option<String>,
    pub persona_id: String,
    pub dialogue_type: DialogueType,
    pub creativity: CreativityLevel,
    #[serde(default)]
    pub prompt_id: Option<String>,
}

/// What a respondent sees of a story.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoryView {
    pub id: String,
    pub persona_id: String,
    pub dialogue_type: DialogueType,
    pub creativity: CreativityLevel,
    pub prompt_id: String,
    pub paragraphs: Vec<String>,
}

impl From<&StoryRecord> for StoryView {
    fn from(r: &StoryRecord) -> Self {
        let n = &r.narrative;
        StoryView {
            id: n.id.clone(),
            persona_id: n.persona_id.clone(),
            dialogue_type: n.dialogue_type,
            creativity: n.creativity,
            prompt_id: n.prompt_id.clone(),
            paragraphs: n.paragraphs.clone(),
        }
    }
}

async fn request_story(
    State(engine): State<AppState>,
    Json(req): Json<StoryRequest>,
) -> Result<(StatusCode, Json<StoryView>), ApiError> {
    let worker = Arc::clone(&engine);
    let record = blocking(move || {
        if let Some(token) = &req.session_token {
            if !worker.store().session_exists(token)? {
                return Err(StoreError::NotFound { kind: "session", id: token.clone() }.into());
            }
        }
        Ok(worker.request_story(&req.persona_id, req.dialogue_type, req.creativity, req.prompt_id.as_deref())?)
    })
    .await?;
    let story_id = record.narrative.id.clone();
    // reflection runs after delivery and is not awaited
    tokio::task::spawn_blocking(move || {
        if let Err(e) = engine.reflect_story(&story_id) {
            log::error!("could not record reflection for {story_id}: {e}");
        }
    });
    Ok((StatusCode::CREATED, Json(StoryView::from(&record))))
}

async fn get_story(State(engine): State<AppState>, Path(id): Path<String>) -> Result<Json<StoryView>, ApiError> {
    let record = blocking(move || Ok(engine.store().fetch_story(&id)?)).await?;
    Ok(Json(StoryView::from(&record)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReflectionView {
    pub story_id: String,
    pub status: ReflectionStatus,
    #[serde(default)]
    pub report: Option<ReflectionReport>,
    #[serde(default)]
    pub error: Option<String>,
}

async fn get_reflection(
    State(engine): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ReflectionView>, ApiError> {
    let record = blocking(move || Ok(engine.store().fetch_story(&id)?)).await?;
    Ok(Json(ReflectionView {
        story_id: record.narrative.id,
        status: record.reflection_status,
        report: record.reflection,
        error: record.reflection_error,
    }))
}

async fn submit_evaluation(
    State(engine): State<AppState>,
    Json(body): Json<EvaluationResponse>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let id = blocking(move || Ok(engine.store().record_evaluation(&body)?)).await?;
    Ok((StatusCode::CREATED, Json(json!({"id": id}))))
}

async fn submit_post_study(
    State(engine): State<AppState>,
    Json(body): Json<PostStudyResponse>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let id = blocking(move || Ok(engine.store().record_post_study(&body)?)).await?;
    Ok((StatusCode::CREATED, Json(json!({"id": id}))))
}

async fn get_report(State(engine): State<AppState>) -> Result<Response, ApiError> {
    let report = blocking(move || Ok(engine.report()?)).await?;
    Ok(Json(report).into_response())
}

async fn get_report_table(State(engine): State<AppState>, Path(table): Path<String>) -> Result<Response, ApiError> {
    let report = blocking(move || Ok(engine.report()?)).await?;
    let name = table.trim_end_matches(".csv");
    match render_table(&report, name) {
        Some(body) => Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown table '{table}'"))),
    }
}
