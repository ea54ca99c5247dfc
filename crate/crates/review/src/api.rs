//! HTTP routes over [`ReviewService`].

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::model::*;
use crate::service::ReviewService;
use crate::ReviewError;

#[derive(Clone)]
struct AppState {
    service: Arc<ReviewService>,
    token: Option<Arc<str>>,
}

impl IntoResponse for ReviewError {
    fn into_response(self) -> Response {
        let status = match &self {
            ReviewError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ReviewError::NotFound(_) => StatusCode::NOT_FOUND,
            ReviewError::Conflict(_) | ReviewError::NoDecisions(_) => StatusCode::CONFLICT,
            ReviewError::Config(_) => StatusCode::BAD_REQUEST,
            ReviewError::Unauthorized => StatusCode::UNAUTHORIZED,
            ReviewError::Gate(_) => StatusCode::BAD_GATEWAY,
            ReviewError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "retriable": self.retriable(),
        });
        (status, Json(body)).into_response()
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ReviewError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ReviewError::Validation(e.body_text()))
}

async fn create_session(
    State(app): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ReviewError> {
    let created = app.service.create_session(body(payload)?).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<ReviewSession>, ReviewError> {
    Ok(Json(app.service.get_session(&id).await?))
}

async fn next_item(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ReviewError> {
    Ok(match app.service.next_item(&id).await? {
        Some(item) => Json(item).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn analyze(
    State(app): State<AppState>,
    payload: Result<Json<AnalyzeRequest>, JsonRejection>,
) -> Result<Json<AssistPayload>, ReviewError> {
    Ok(Json(app.service.analyze(body(payload)?).await?))
}

async fn record_decision(
    State(app): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<ReviewDecision>), ReviewError> {
    let decision = app.service.record_decision(&id, body(payload)?).await?;
    Ok((StatusCode::CREATED, Json(decision)))
}

async fn summary(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionSummary>, ReviewError> {
    Ok(Json(app.service.summary(&id).await?))
}

async fn require_token(State(app): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &app.token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token) {
            return ReviewError::Unauthorized.into_response();
        }
    }
    next.run(request).await
}

/// Routes for the review workflow. When `token` is set every request must carry it as a bearer token.
pub fn router(service: Arc<ReviewService>, token: Option<String>) -> Router {
    let state = AppState {
        service,
        token: token.map(Arc::from),
    };
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/decisions", post(record_decision))
        .route("/sessions/{id}/summary", get(summary))
        .route("/analyze", post(analyze))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, service: Arc<ReviewService>, token: Option<String>) -> std::io::Result<()> {
    axum::serve(listener, router(service, token)).await
}
