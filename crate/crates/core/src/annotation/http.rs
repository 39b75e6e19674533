//! JSON-over-HTTP front for [`AnnotationService`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::service::{AnnotationService, RatingSubmission};
use crate::error::Error;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            Error::Validation(_) | Error::Parse { .. } => (StatusCode::BAD_REQUEST, "validation"),
            Error::Auth(_) => (StatusCode::UNAUTHORIZED, "auth"),
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::NotReady(_) => (StatusCode::CONFLICT, "not_ready"),
            Error::Config(_) => (StatusCode::PRECONDITION_FAILED, "precondition"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        (status, Json(json!({ "error": kind, "message": self.0.to_string() }))).into_response()
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError(Error::Validation(e.body_text())))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSession {
    pub annotator_id: String,
    #[serde(default)]
    pub seed: u64,
}

type Shared = Arc<AnnotationService>;

async fn create_session(
    State(svc): State<Shared>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let req = body(payload)?;
    let info = svc.create_session(&req.annotator_id, req.seed)?;
    Ok((StatusCode::CREATED, Json(info)))
}

async fn next(State(svc): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(svc.next(&id)?))
}

async fn submit(
    State(svc): State<Shared>,
    payload: Result<Json<RatingSubmission>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let n = svc.submit(body(payload)?)?;
    Ok(Json(json!({ "ok": true, "log_length": n })))
}

async fn audio(State(svc): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let svc2 = svc.clone();
    let bytes = tokio::task::spawn_blocking(move || svc2.audio_wav(&id))
        .await
        .map_err(|e| ApiError(Error::Validation(format!("audio task failed: {e}"))))??;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes))
}

async fn stats(State(svc): State<Shared>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(svc.stats()?))
}

pub fn router(service: Arc<AnnotationService>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next))
        .route("/ratings", post(submit))
        .route("/segments/{id}/audio", get(audio))
        .route("/stats", get(stats))
        .with_state(service)
}

/// Binds and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, service: Arc<AnnotationService>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}
