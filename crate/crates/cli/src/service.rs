//! HTTP collection service over a [`TrialStore`].
//!
//! | method | path                          | success                |
//! |--------|-------------------------------|------------------------|
//! | POST   | `/sessions`                   | 201, session manifest  |
//! | GET    | `/sessions/{id}/next-condition` | 200, assignment      |
//! | POST   | `/sessions/{id}/trials`       | 201 new, 200 duplicate |
//! | GET    | `/sessions/{id}/export`       | 200, trial file bytes  |
//!
//! Errors are `{"error": kind, "message": text}` plus `"field"` for
//! validation failures: 400 invalid input, 404 unknown session, 409 session
//! exists or idempotency conflict.

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use metanic_core::store::{NewSession, TrialStore};
use metanic_core::{Error, TrialRecord};
use serde_json::{json, Value};

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.0.to_string();
        let (status, kind, field) = match &self.0 {
            Error::Validation { field, .. } => (StatusCode::BAD_REQUEST, "validation", Some(field.clone())),
            Error::Json(_) | Error::Parse { .. } => (StatusCode::BAD_REQUEST, "malformed_body", None),
            Error::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session", None),
            Error::SessionExists(_) => (StatusCode::CONFLICT, "session_exists", None),
            Error::IdempotencyConflict { .. } => (StatusCode::CONFLICT, "idempotency_conflict", None),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal", None),
        };
        let mut body = json!({ "error": kind, "message": message });
        if let Some(f) = field {
            body["field"] = Value::String(f);
        }
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<TrialStore>;

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next-condition", get(next_condition))
        .route("/sessions/{id}/trials", post(submit_trial))
        .route("/sessions/{id}/export", get(export))
        .with_state(store)
}

/// Store calls touch the disk; keep them off the async workers.
async fn blocking<T, F>(store: Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&TrialStore) -> Result<T, Error> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError(Error::Io(std::io::Error::other(e))))?
        .map_err(ApiError)
}

async fn create_session(State(store): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let request: NewSession = if body.iter().all(u8::is_ascii_whitespace) {
        NewSession::default()
    } else {
        serde_json::from_slice(&body).map_err(Error::from)?
    };
    let manifest = blocking(store, move |s| s.create_session(request)).await?;
    Ok((StatusCode::CREATED, Json(manifest)).into_response())
}

async fn next_condition(State(store): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let assignment = blocking(store, move |s| s.next_condition(&id)).await?;
    Ok(Json(assignment).into_response())
}

async fn submit_trial(
    State(store): State<Shared>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    // The session id may be left out of the body; the path supplies it.
    let mut value: Value = serde_json::from_slice(&body).map_err(Error::from)?;
    if let Value::Object(map) = &mut value {
        map.entry("session_id").or_insert_with(|| Value::String(id.clone()));
    }
    let record: TrialRecord = serde_json::from_value(value).map_err(Error::from)?;
    let ack = blocking(store, move |s| s.append_trial(&id, &record)).await?;
    let status = if ack.duplicate { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(ack)).into_response())
}

async fn export(State(store): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let bytes = blocking(store, move |s| s.export(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

pub async fn serve(host: &str, port: u16, data_dir: &Path) -> Result<(), Error> {
    let store = Arc::new(TrialStore::open(data_dir)?);
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

pub fn serve_blocking(host: &str, port: u16, data_dir: &Path) -> Result<(), Error> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(host, port, data_dir))
}
