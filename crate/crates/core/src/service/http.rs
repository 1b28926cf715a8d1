use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::json;

use super::hub::StreamItem;
use super::manager::RunManager;
use super::query::{Component, EmbeddingOptions, SelectionQuery};
use crate::error::Error;

pub const BIND_ENV: &str = "FEDGRAPH_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

/// Address from `FEDGRAPH_BIND`, or the default.
pub fn bind_address() -> String {
    std::env::var(BIND_ENV).unwrap_or_else(|_| DEFAULT_BIND.to_string())
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match &self.0 {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::InvalidTransition { .. } => StatusCode::CONFLICT,
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::Schema(_)
            | Error::PrivacyConfig(_)
            | Error::Json(_)
            | Error::DimensionMismatch { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// Run blocking manager work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> crate::error::Result<T> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError),
        Err(e) => Err(ApiError(Error::Protocol(format!("request task failed: {e}")))),
    }
}

#[derive(Deserialize)]
struct CreateParams {
    simulate: Option<bool>,
}

#[derive(Deserialize)]
struct RepresentationParams {
    checkpoint: Option<u64>,
    component: Component,
    /// JSON-encoded selection.
    selection: Option<String>,
    /// JSON-encoded embedding options.
    options: Option<String>,
}

pub fn router(manager: Arc<RunManager>) -> Router {
    Router::new()
        .route("/runs", post(create_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/{action}", post(act))
        .route("/runs/{id}/metrics", get(stream_metrics))
        .route("/runs/{id}/representation", get(representation))
        .route("/runs/{id}/checkpoints/{round}", get(checkpoint))
        .with_state(manager)
}

async fn create_run(
    State(m): State<Arc<RunManager>>,
    Query(params): Query<CreateParams>,
    body: String,
) -> ApiResult<impl IntoResponse> {
    let simulated = params.simulate.unwrap_or(true);
    let id = blocking(move || m.create_from_toml(&body, simulated)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

async fn list_runs(State(m): State<Arc<RunManager>>) -> impl IntoResponse {
    Json(m.list())
}

async fn get_run(State(m): State<Arc<RunManager>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(m.get(&id)?))
}

async fn act(
    State(m): State<Arc<RunManager>>,
    Path((id, action)): Path<(String, String)>,
) -> ApiResult<impl IntoResponse> {
    let run = id.clone();
    blocking(move || match action.as_str() {
        "start" => m.start(&run),
        "pause" => m.pause(&run),
        "resume" => m.resume(&run),
        "early_stop" => m.early_stop(&run),
        other => Err(Error::NotFound(format!("unknown action `{other}`"))),
    })
    .await?;
    Ok(Json(json!({ "id": id })))
}

async fn stream_metrics(
    State(m): State<Arc<RunManager>>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = std::result::Result<SseEvent, Infallible>>>> {
    let sub = m.subscribe(&id)?;
    let events = stream::unfold(sub, |mut sub| async move {
        let item = sub.next().await?;
        let event = match &item {
            StreamItem::Metrics(metrics) => SseEvent::default().event("metrics").json_data(metrics),
            StreamItem::End { status } => SseEvent::default().event("end").json_data(json!({ "status": status })),
        }
        .expect("stream items serialize");
        Some((Ok(event), sub))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

fn parse_json<T: for<'de> Deserialize<'de> + Default>(raw: Option<&str>, what: &str) -> ApiResult<T> {
    match raw {
        None | Some("") => Ok(T::default()),
        Some(text) => serde_json::from_str(text).map_err(|e| ApiError(Error::invalid(format!("bad {what}: {e}")))),
    }
}

async fn representation(
    State(m): State<Arc<RunManager>>,
    Path(id): Path<String>,
    Query(params): Query<RepresentationParams>,
) -> ApiResult<impl IntoResponse> {
    let selection: SelectionQuery = parse_json(params.selection.as_deref(), "selection")?;
    let options: EmbeddingOptions = parse_json(params.options.as_deref(), "options")?;
    let payload = blocking(move || m.query(&id, params.checkpoint, params.component, &selection, &options)).await?;
    Ok(Json(payload))
}

async fn checkpoint(
    State(m): State<Arc<RunManager>>,
    Path((id, round)): Path<(String, u64)>,
) -> ApiResult<impl IntoResponse> {
    let bytes = blocking(move || m.checkpoint_bytes(&id, round)).await?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], Bytes::from(bytes)))
}

/// Serve the API until the process is stopped.
pub async fn serve(manager: Arc<RunManager>, addr: &str) -> crate::error::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(manager)).await?;
    Ok(())
}
