//! HTTP routes. Bodies are JSON; failures carry `{"error": message}`.

use std::collections::HashMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use image::ImageFormat;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::RwLock;

use crate::error::AnnotateError;
use crate::session::{AnnotationSession, ChunkRange, DeleteStatus};

pub const THUMBNAIL_SIDE: u32 = 128;

/// Shared service state. Readers share the session; every mutation takes
/// the single write lock, so writes apply one at a time in arrival order.
#[derive(Clone)]
pub struct AppState {
    session: Arc<RwLock<AnnotationSession>>,
    thumbs: Arc<Mutex<HashMap<String, Arc<Vec<u8>>>>>,
}

impl AppState {
    pub fn new(session: AnnotationSession) -> Self {
        Self {
            session: Arc::new(RwLock::new(session)),
            thumbs: Arc::default(),
        }
    }

    pub fn session(&self) -> &Arc<RwLock<AnnotationSession>> {
        &self.session
    }
}

struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    /// Unknown or deleted ids map to 404 on routes naming one resource and
    /// to 400 inside request bodies.
    fn from_error(e: AnnotateError, single_resource: bool) -> Self {
        let status = match &e {
            AnnotateError::UnknownId(_) | AnnotateError::Deleted(_) if single_resource => {
                StatusCode::NOT_FOUND
            }
            e if e.is_validation() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<AnnotateError> for ApiError {
    fn from(e: AnnotateError) -> Self {
        Self::from_error(e, false)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| AnnotateError::BadRequest(e.to_string()).into())
}

#[derive(Debug, Deserialize)]
struct LabelRequest {
    #[serde(flatten)]
    range: ChunkRange,
    label: String,
}

#[derive(Debug, Deserialize)]
struct DeleteRequest {
    ids: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct ExportRequest {
    path: PathBuf,
}

#[derive(Debug, Serialize)]
struct DaysResponse {
    days: Vec<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/labels", get(labels))
        .route("/days", get(days))
        .route("/days/:date", get(day))
        .route("/images/:id", get(full_image))
        .route("/thumbs/:id", get(thumbnail))
        .route("/label", post(label))
        .route("/delete", post(delete))
        .route("/export", post(export))
        .route("/audit", get(audit))
        .with_state(state)
}

async fn labels(State(state): State<AppState>) -> Response {
    Json(json!({ "labels": state.session.read().await.label_set().names() })).into_response()
}

async fn days(State(state): State<AppState>) -> Json<DaysResponse> {
    let days = state.session.read().await.days();
    Json(DaysResponse {
        days: days.iter().map(|d| d.to_string()).collect(),
    })
}

async fn day(State(state): State<AppState>, Path(date): Path<String>) -> ApiResult<Response> {
    let parsed = NaiveDate::parse_from_str(&date, "%Y-%m-%d").map_err(|_| {
        AnnotateError::BadRequest(format!("date `{date}` is not of the form YYYY-MM-DD"))
    })?;
    let images = state.session.read().await.list_day(parsed);
    Ok(Json(json!({ "date": date, "images": images })).into_response())
}

async fn audit(State(state): State<AppState>) -> Response {
    Json(json!({ "audit": state.session.read().await.audit() })).into_response()
}

fn png(bytes: Arc<Vec<u8>>) -> Response {
    (
        [(header::CONTENT_TYPE, "image/png")],
        bytes.as_ref().clone(),
    )
        .into_response()
}

async fn encode_png(path: PathBuf, side: Option<u32>) -> ApiResult<Vec<u8>> {
    tokio::task::spawn_blocking(move || -> Result<Vec<u8>, AnnotateError> {
        let img = egoact::pixel::load_rgb(&path)?;
        let img = match side {
            Some(s) => image::imageops::thumbnail(&img, s.min(img.width()), s.min(img.height())),
            None => img,
        };
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)
            .map_err(|e| egoact::Error::Image {
                id: path.display().to_string(),
                message: e.to_string(),
            })?;
        Ok(out.into_inner())
    })
    .await
    .map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
    })?
    .map_err(ApiError::from)
}

async fn image_path(state: &AppState, id: &str) -> ApiResult<PathBuf> {
    state
        .session
        .read()
        .await
        .image_path(id)
        .map_err(|e| ApiError::from_error(e, true))
}

async fn full_image(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let path = image_path(&state, &id).await?;
    Ok(png(Arc::new(encode_png(path, None).await?)))
}

async fn thumbnail(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    // Deleted images must stop being served even when cached.
    let path = image_path(&state, &id).await?;
    if let Some(hit) = state
        .thumbs
        .lock()
        .expect("thumbnail cache")
        .get(&id)
        .cloned()
    {
        return Ok(png(hit));
    }
    let bytes = Arc::new(encode_png(path, Some(THUMBNAIL_SIDE)).await?);
    state
        .thumbs
        .lock()
        .expect("thumbnail cache")
        .insert(id, bytes.clone());
    Ok(png(bytes))
}

async fn label(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: LabelRequest = parse_body(&body)?;
    let updated = state
        .session
        .write()
        .await
        .label_chunk(&req.range, &req.label)?;
    Ok(Json(json!({ "updated": updated })).into_response())
}

async fn delete(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: DeleteRequest = parse_body(&body)?;
    let outcomes = state.session.write().await.delete_images(&req.ids)?;
    let deleted = outcomes
        .iter()
        .filter(|o| o.status == DeleteStatus::Deleted)
        .count();
    {
        let mut cache = state.thumbs.lock().expect("thumbnail cache");
        for o in &outcomes {
            cache.remove(&o.id);
        }
    }
    Ok(Json(json!({ "deleted": deleted, "statuses": outcomes })).into_response())
}

async fn export(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: ExportRequest = parse_body(&body)?;
    // The read guard holds writers off, so the file is a consistent snapshot.
    let records = {
        let session = state.session.read().await;
        session.export_manifest(&req.path).map_err(ApiError::from)?
    };
    Ok(Json(json!({ "path": req.path, "records": records })).into_response())
}

/// Serves until the process is stopped.
pub async fn serve(session: AnnotationSession, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(session))).await
}
