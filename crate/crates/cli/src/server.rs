//! HTTP API over [`Service`].

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use sqlclarify_core::service::{
    ApiError, ApiErrorCode, CompareRequest, CreateSessionRequest, Service, SubmitAnswersRequest,
};
use tower_http::services::{ServeDir, ServeFile};

/// JSON error body with the status taken from the error code.
pub struct HttpError(pub ApiError);

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::warn!(code = ?self.0.code, message = %self.0.message, "request failed");
        }
        (status, Json(self.0)).into_response()
    }
}

impl From<ApiError> for HttpError {
    fn from(e: ApiError) -> Self {
        HttpError(e)
    }
}

impl From<JsonRejection> for HttpError {
    fn from(e: JsonRejection) -> Self {
        HttpError(ApiError::new(ApiErrorCode::Validation, e.body_text()))
    }
}

type ApiResult<T> = Result<Json<T>, HttpError>;

/// Runs a blocking service call off the async workers.
async fn blocking<T, F>(service: Arc<Service>, f: F) -> ApiResult<T>
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Service) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| HttpError(ApiError::new(ApiErrorCode::Internal, e.to_string())))?
        .map(Json)
        .map_err(HttpError)
}

/// Builds the API router; `static_dir` (if any) is served for all other
/// paths with `index.html` as the fallback.
pub fn router(service: Arc<Service>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answers", post(submit_answers))
        .route("/sessions/{id}/result", get(get_result))
        .route("/examples", get(examples))
        .route("/databases", get(databases))
        .route("/compare", post(compare))
        .with_state(service);
    match static_dir {
        Some(dir) => {
            let index = dir.join("index.html");
            api.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => api.fallback(|| async {
            HttpError(ApiError::new(ApiErrorCode::NotFound, "no such route"))
        }),
    }
}

async fn create_session(
    State(service): State<Arc<Service>>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<Response, HttpError> {
    let Json(req) = body?;
    let summary = blocking(service, move |s| s.create_session(&req)).await?;
    Ok((StatusCode::CREATED, summary).into_response())
}

async fn get_session(State(service): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    service.get_session(&id).map(Json).map_err(HttpError)
}

async fn submit_answers(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Result<Json<SubmitAnswersRequest>, JsonRejection>,
) -> ApiResult<impl Serialize> {
    let Json(req) = body?;
    blocking(service, move |s| s.submit_answers(&id, &req)).await
}

async fn get_result(State(service): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    blocking(service, move |s| s.get_result(&id)).await
}

async fn examples(State(service): State<Arc<Service>>) -> ApiResult<impl Serialize> {
    Ok(Json(service.examples().to_vec()))
}

async fn databases(State(service): State<Arc<Service>>) -> ApiResult<impl Serialize> {
    Ok(Json(service.databases()))
}

async fn compare(
    State(service): State<Arc<Service>>,
    body: Result<Json<CompareRequest>, JsonRejection>,
) -> ApiResult<impl Serialize> {
    let Json(req) = body?;
    blocking(service, move |s| s.compare(&req)).await
}
