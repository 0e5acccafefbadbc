use std::collections::HashMap;

use audit_core::labels::{valid_labeler_id, LabelRecord, LabelValue};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{any, get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::state::{AppState, SubmitError};

const EMBEDDED_INDEX: &str = include_str!("index.html");

/// The API under `/api` plus static assets everywhere else. Unknown `/api`
/// paths get a JSON 404 and never fall through to the assets.
pub fn router(state: AppState) -> Router {
    let static_dir = state.options().static_dir.clone();
    let api = Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/labels", post(submit_label))
        .route("/api/progress", get(progress))
        .route("/api/articles/{id}/matches", get(article_matches))
        .route("/api", any(api_not_found))
        .route("/api/{*rest}", any(api_not_found))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(embedded_asset),
    }
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    let body = json!({ "error": { "code": code, "message": message.into() } });
    (status, Json(body)).into_response()
}

async fn next_task(State(state): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Response {
    let Some(labeler) = q.get("labeler").map(|s| s.trim()).filter(|s| !s.is_empty()) else {
        return error(StatusCode::BAD_REQUEST, "MISSING_LABELER", "query parameter `labeler` is required");
    };
    if !valid_labeler_id(labeler) {
        return error(StatusCode::BAD_REQUEST, "INVALID_LABELER", format!("labeler {labeler:?} must be a slug"));
    }
    match state.next_task(labeler) {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitBody {
    article_id: String,
    paragraph_index: usize,
    public_data: LabelValue,
    public_code: LabelValue,
    labeler: String,
    #[serde(default)]
    note: Option<String>,
}

async fn submit_label(State(state): State<AppState>, body: Bytes) -> Response {
    let value: serde_json::Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, "INVALID_JSON", e.to_string()),
    };
    let parsed: SubmitBody = match serde_json::from_value(value) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_LABEL", e.to_string()),
    };
    if !valid_labeler_id(&parsed.labeler) {
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            "INVALID_LABEL",
            format!("labeler {:?} must be a slug", parsed.labeler),
        );
    }
    let record = LabelRecord {
        article_id: parsed.article_id,
        paragraph_index: parsed.paragraph_index,
        public_data: parsed.public_data,
        public_code: parsed.public_code,
        labeler_id: parsed.labeler,
        labeled_at: DateTime::<Utc>::UNIX_EPOCH,
        note: parsed.note.filter(|n| !n.trim().is_empty()),
    };
    // The append fsyncs; keep it off the async workers.
    let result = tokio::task::spawn_blocking(move || state.submit(record)).await;
    match result {
        Ok(Ok(rec)) => (StatusCode::CREATED, Json(rec)).into_response(),
        Ok(Err(SubmitError::Leased { holder })) => error(
            StatusCode::CONFLICT,
            "LEASED",
            format!("task is leased to {holder}"),
        ),
        Ok(Err(SubmitError::Core(e))) => {
            let status = match e.code() {
                "UNKNOWN_TARGET" => StatusCode::NOT_FOUND,
                "INVALID_LABEL" => StatusCode::UNPROCESSABLE_ENTITY,
                "CLOCK_SKEW" => StatusCode::CONFLICT,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            };
            error(status, e.code(), e.to_string())
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()),
    }
}

async fn progress(State(state): State<AppState>) -> Response {
    Json(state.progress()).into_response()
}

async fn article_matches(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.article_matches(&id) {
        Some(m) => Json(m).into_response(),
        None => error(StatusCode::NOT_FOUND, "UNKNOWN_ARTICLE", format!("no article {id}")),
    }
}

async fn api_not_found(uri: Uri) -> Response {
    error(StatusCode::NOT_FOUND, "NOT_FOUND", format!("no endpoint {}", uri.path()))
}

async fn embedded_asset(uri: Uri) -> Response {
    match uri.path() {
        "/" | "/index.html" => (
            [(header::CONTENT_TYPE, "text/html; charset=utf-8")],
            EMBEDDED_INDEX,
        )
            .into_response(),
        _ => (StatusCode::NOT_FOUND, "not found").into_response(),
    }
}
