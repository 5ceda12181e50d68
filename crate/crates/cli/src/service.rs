//! HTTP service over one immutable model.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use crate::wire::{parse_query, FieldError, PatientQuery, RequestError, ServedModel};

/// Default listening port.
pub const DEFAULT_PORT: u16 = 8723;

#[derive(Clone)]
struct AppState {
    model: Option<Arc<ServedModel>>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<FieldError>,
}

#[derive(Debug)]
enum ApiError {
    Request(RequestError),
    NoModel,
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error, fields) = match self {
            ApiError::Request(e @ RequestError::Malformed(_)) => (
                StatusCode::BAD_REQUEST,
                "malformed request".to_string(),
                e.fields().to_vec(),
            ),
            ApiError::Request(e @ RequestError::OutOfRange(_)) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "value out of range".to_string(),
                e.fields().to_vec(),
            ),
            ApiError::NoModel => (
                StatusCode::SERVICE_UNAVAILABLE,
                "model not loaded".to_string(),
                Vec::new(),
            ),
            ApiError::Internal(message) => (StatusCode::INTERNAL_SERVER_ERROR, message, Vec::new()),
        };
        (status, Json(ErrorBody { error, fields })).into_response()
    }
}

/// Builds the `/api/v1` router. With no model every endpoint answers 503.
pub fn router(model: Option<ServedModel>) -> Router {
    let state = AppState {
        model: model.map(Arc::new),
    };
    Router::new()
        .route("/api/v1/predict", post(predict))
        .route("/api/v1/neighbors", post(neighbors))
        .route("/api/v1/model/info", get(info))
        .with_state(state)
}

fn loaded(state: &AppState) -> Result<Arc<ServedModel>, ApiError> {
    state.model.clone().ok_or(ApiError::NoModel)
}

/// Parses the body, then runs `work` off the async executor.
async fn answer<T, F>(state: AppState, body: Bytes, allow_k: bool, work: F) -> Result<Json<T>, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&ServedModel, &PatientQuery) -> distforest::Result<T> + Send + 'static,
{
    let model = loaded(&state)?;
    let query = parse_query(&body, allow_k).map_err(ApiError::Request)?;
    tokio::task::spawn_blocking(move || work(&model, &query))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map(Json)
        .map_err(|e| ApiError::Internal(e.to_string()))
}

async fn predict(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    answer(state, body, false, |m, q| m.predict(q)).await
}

async fn neighbors(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    answer(state, body, true, |m, q| m.neighbors(q)).await
}

async fn info(State(state): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(loaded(&state)?.info()))
}

/// Serves until interrupted.
pub async fn serve(model: Option<ServedModel>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(model))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
