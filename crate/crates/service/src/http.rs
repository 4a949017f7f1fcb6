use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use flexq_core::knowledge::KnowledgeError;
use flexq_core::executor::ExecError;
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

use crate::engine::{Engine, PipelineError};

pub struct ApiError {
    status: StatusCode,
    error: PipelineError,
}

impl From<PipelineError> for ApiError {
    fn from(error: PipelineError) -> Self {
        let status = match &error {
            PipelineError::Knowledge(KnowledgeError::UnknownEntry(_)) => StatusCode::NOT_FOUND,
            PipelineError::Knowledge(KnowledgeError::Io { .. })
            | PipelineError::Knowledge(KnowledgeError::CorruptJournal { .. }) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            PipelineError::Exec(ExecError::TypeMismatch { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            PipelineError::Exec(_) => StatusCode::INTERNAL_SERVER_ERROR,
            PipelineError::Lexicon(flexq_core::lexicon::LexiconError::Io { .. }) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError { status, error }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({
            "error": self.error.code(),
            "stage": self.error.stage(),
            "message": self.error.to_string(),
        });
        let candidates = self.error.candidates();
        if !candidates.is_empty() {
            body["candidates"] = json!(candidates);
        }
        if let Some(words) = self.error.conjunction_suggestions() {
            body["remedy"] = json!({
                "action": "add-conjunction",
                "endpoint": "/api/lexicon/conjunctions",
                "suggestions": words,
            });
        }
        (self.status, Json(body)).into_response()
    }
}

#[derive(Deserialize)]
struct TranslateRequest {
    query: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ExecuteRequest {
    query_id: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct FeedbackRequest {
    query_id: String,
    verdict: String,
    note: Option<String>,
}

#[derive(Deserialize)]
struct KbQuery {
    key: String,
}

#[derive(Deserialize)]
struct ConjunctionRequest {
    word: String,
}

async fn translate(
    State(engine): State<Arc<Engine>>,
    Json(req): Json<TranslateRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let resp = engine.translate(&req.query)?;
    tracing::info!(query_id = %resp.query_id, source = ?resp.source, "translated");
    Ok(Json(resp))
}

async fn execute(
    State(engine): State<Arc<Engine>>,
    Json(req): Json<ExecuteRequest>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(engine.execute(&req.query_id)?))
}

async fn feedback(
    State(engine): State<Arc<Engine>>,
    Json(req): Json<FeedbackRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let summary = engine.feedback(&req.query_id, &req.verdict, req.note.as_deref())?;
    tracing::info!(query_id = %summary.query_id, status = ?summary.status, "feedback");
    Ok(Json(summary))
}

async fn schema(State(engine): State<Arc<Engine>>) -> impl IntoResponse {
    Json(engine.schema_summary())
}

async fn kb(State(engine): State<Arc<Engine>>, Query(q): Query<KbQuery>) -> impl IntoResponse {
    Json(engine.entries_for(&q.key))
}

async fn add_conjunction(
    State(engine): State<Arc<Engine>>,
    Json(req): Json<ConjunctionRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let lex = engine.add_conjunction(&req.word)?;
    Ok(Json(json!({ "conjunctions": lex.conjunctions() })))
}

/// The HTTP API. `cors_origin` of `None` allows any origin.
pub fn router(engine: Arc<Engine>, cors_origin: Option<&str>) -> Router {
    let cors = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    let cors = match cors_origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(origin) => cors.allow_origin(origin),
        None => cors.allow_origin(Any),
    };
    Router::new()
        .route("/api/translate", post(translate))
        .route("/api/execute", post(execute))
        .route("/api/feedback", post(feedback))
        .route("/api/schema", get(schema))
        .route("/api/kb", get(kb))
        .route("/api/lexicon/conjunctions", post(add_conjunction))
        .layer(cors)
        .with_state(engine)
}
