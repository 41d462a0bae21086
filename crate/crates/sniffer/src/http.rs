//! HTTP/JSON API of the control service.
//!
//! ```text
//! GET    /healthz
//! GET    /configs                 POST /configs
//! GET    /configs/{name}          PUT  /configs/{name}    DELETE /configs/{name}
//! POST   /configs/{name}/start    POST /configs/{name}/stop
//! GET    /configs/{name}/output   (text/csv)
//! ```
//!
//! Errors are `{"error": "..."}` with 400 (invalid input), 404, 409 (state
//! conflict), 502 (collector error), 503 (broker unreachable) or 504
//! (download timeout).

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::config::CaptureSettings;
use crate::control::ControlService;
use crate::Error;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self(Error::InvalidConfig(e.body_text()))
    }
}

pub fn status_for(error: &Error) -> StatusCode {
    match error {
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::Conflict(_) => StatusCode::CONFLICT,
        Error::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        Error::Timeout => StatusCode::GATEWAY_TIMEOUT,
        Error::Collector(_) => StatusCode::BAD_GATEWAY,
        e if e.is_validation() => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(&self.0);
        if status.is_server_error() {
            log::warn!("request failed: {}", self.0);
        }
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Svc = State<Arc<ControlService>>;

/// Builds the router; `ui_dir` is served under `/ui` when given.
pub fn router(service: Arc<ControlService>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/configs", get(list).post(create))
        .route("/configs/{name}", get(read).put(update).delete(remove))
        .route("/configs/{name}/start", post(start))
        .route("/configs/{name}/stop", post(stop))
        .route("/configs/{name}/output", get(output))
        .with_state(service);
    match ui_dir {
        Some(dir) => api.nest_service(
            "/ui",
            tower_http::services::ServeDir::new(&dir).append_index_html_on_directories(true),
        ),
        None => api,
    }
}

async fn healthz(State(svc): Svc) -> impl IntoResponse {
    Json(svc.health())
}

async fn list(State(svc): Svc) -> impl IntoResponse {
    Json(svc.list())
}

async fn create(State(svc): Svc, body: Result<Json<CaptureSettings>, JsonRejection>) -> ApiResult<Response> {
    let Json(settings) = body?;
    let created = svc.create(settings).await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn read(State(svc): Svc, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(svc.get(&name)?).into_response())
}

async fn update(
    State(svc): Svc,
    Path(name): Path<String>,
    body: Result<Json<CaptureSettings>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(settings) = body?;
    Ok(Json(svc.update(&name, settings).await?).into_response())
}

async fn remove(State(svc): Svc, Path(name): Path<String>) -> ApiResult<StatusCode> {
    svc.delete(&name).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn start(State(svc): Svc, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(svc.start(&name).await?).into_response())
}

async fn stop(State(svc): Svc, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(svc.stop(&name).await?).into_response())
}

async fn output(State(svc): Svc, Path(name): Path<String>) -> ApiResult<Response> {
    let download = svc.download(&name).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{name}.csv\"")),
            (header::HeaderName::from_static("x-row-count"), download.row_count.to_string()),
        ],
        download.bytes,
    )
        .into_response())
}

/// Serves the API until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
