//! HTTP API over the pipeline and the evaluator.
//!
//! ```text
//! GET  /api/health            {"status": "ok"}
//! GET  /api/bank              question bank document
//! GET  /api/images            [{id, thumbnail_url}]
//! GET  /api/images/{id}       image bytes
//! POST /api/ask               AnswerRecord
//! POST /api/evaluate          {"job_id"}
//! GET  /api/jobs/{id}         JobView
//! DELETE /api/jobs/{id}       cancel
//! GET  /api/sessions/{id}     SessionLog
//! POST /api/replay            re-run a SessionLog, compare final answers
//! ```

pub mod config;
pub mod jobs;
pub mod sessions;

use std::net::{SocketAddr, ToSocketAddrs};
use std::num::NonZeroUsize;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::backend::http::health;
use crate::backend::server::{error_response, parse_body, wire_image_id, ServerHandle};
use crate::backend::wire::{media_type_for, WireImage};
use crate::backend::{
    BackendError, BackendKind, HttpEmbedder, HttpGenerator, ImageLocator, ImageRef,
};
use crate::bank::{BankError, QuestionBank};
use crate::eval::{evaluate_with_progress, DatasetDocument, EvalOptions};
use crate::pipeline::{AnswerRecord, Pipeline};

pub use config::{EndpointConfig, ServiceConfig};
pub use jobs::{JobStatus, JobView};
pub use sessions::{SessionEntry, SessionLog};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid question bank {path}: {source}")]
    Bank {
        path: String,
        #[source]
        source: BankError,
    },
    #[error("{kind} backend at {url} failed its health check: {source}")]
    Unhealthy {
        kind: BackendKind,
        url: String,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

const IMAGE_EXTENSIONS: [&str; 7] = ["jpg", "jpeg", "png", "tif", "tiff", "webp", "bmp"];

/// Shared state behind the router.
pub struct ServiceState {
    pipeline: Pipeline,
    image_root: PathBuf,
    parallelism: usize,
    sessions: sessions::SessionStore,
    jobs: jobs::JobRegistry,
}

impl ServiceState {
    pub fn new(pipeline: Pipeline, image_root: impl Into<PathBuf>, parallelism: usize) -> Self {
        Self {
            pipeline,
            image_root: image_root.into(),
            parallelism: parallelism.max(1),
            sessions: Default::default(),
            jobs: Default::default(),
        }
    }

    pub fn router(self) -> Router {
        Router::new()
            .route(
                "/api/health",
                get(|| async { Json(json!({"status": "ok"})) }),
            )
            .route("/api/bank", get(get_bank))
            .route("/api/images", get(list_images))
            .route("/api/images/{*id}", get(get_image))
            .route("/api/ask", post(ask))
            .route("/api/evaluate", post(start_evaluation))
            .route("/api/jobs/{id}", get(get_job).delete(cancel_job))
            .route("/api/sessions/{id}", get(get_session))
            .route("/api/replay", post(replay))
            .with_state(Arc::new(self))
    }

    /// Resolve an image id relative to the image root. `None` for ids that
    /// escape the root or name no file.
    fn resolve_image_id(&self, id: &str) -> Option<PathBuf> {
        let rel = Path::new(id);
        if id.is_empty() || !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return None;
        }
        let path = self.image_root.join(rel);
        path.is_file().then_some(path)
    }

    fn owns_path(&self, path: &Path) -> bool {
        path.strip_prefix(&self.image_root)
            .ok()
            .and_then(|rel| rel.to_str())
            .and_then(|rel| self.resolve_image_id(rel))
            .is_some()
    }
}

/// Validate the config, load the bank, health-check the backends and start serving.
pub fn serve(config: &ServiceConfig) -> Result<ServerHandle, ServiceError> {
    config.validate()?;
    let bank = QuestionBank::from_path(&config.bank_path).map_err(|source| ServiceError::Bank {
        path: config.bank_path.display().to_string(),
        source,
    })?;

    for kind in [BackendKind::Generator, BackendKind::Embedder] {
        let endpoint = config.endpoint(kind);
        match health(&endpoint) {
            Ok(h) => {
                tracing::info!(%kind, url = %endpoint.base_url, model = %h.model, "backend healthy")
            }
            Err(source) if config.strict_health => {
                return Err(ServiceError::Unhealthy {
                    kind,
                    url: endpoint.base_url,
                    source,
                })
            }
            Err(e) => {
                tracing::warn!(%kind, url = %endpoint.base_url, error = %e, "backend health check failed")
            }
        }
    }

    let generator = HttpGenerator::new(config.endpoint(BackendKind::Generator))?;
    let embedder = HttpEmbedder::new(config.endpoint(BackendKind::Embedder))?;
    let mut pipeline = Pipeline::new(bank, Arc::new(generator), Arc::new(embedder));
    if let Some(cap) = NonZeroUsize::new(config.cache_capacity) {
        pipeline = pipeline.with_cache(cap);
    }
    let state = ServiceState::new(pipeline, &config.image_root, config.parallelism);

    let addr_str = format!("{}:{}", config.listen, config.port);
    let addr: SocketAddr = addr_str
        .to_socket_addrs()
        .ok()
        .and_then(|mut a| a.next())
        .ok_or_else(|| ServiceError::Config(format!("cannot resolve listen address {addr_str}")))?;
    ServerHandle::spawn(state.router(), addr).map_err(|source| ServiceError::Bind {
        addr: addr_str,
        source,
    })
}

type AppState = State<Arc<ServiceState>>;

async fn get_bank(State(s): AppState) -> Response {
    Json(s.pipeline.bank().clone()).into_response()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageListing {
    pub id: String,
    pub thumbnail_url: String,
}

fn walk_images(root: &Path, dir: &Path, out: &mut Vec<String>) {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return;
    };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            walk_images(root, &path, out);
        } else if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        {
            if let Some(rel) = path.strip_prefix(root).ok().and_then(|r| r.to_str()) {
                out.push(rel.replace('\\', "/"));
            }
        }
    }
}

async fn list_images(State(s): AppState) -> Response {
    let mut ids = Vec::new();
    walk_images(&s.image_root, &s.image_root, &mut ids);
    ids.sort();
    let listing: Vec<ImageListing> = ids
        .into_iter()
        .map(|id| ImageListing {
            thumbnail_url: format!("/api/images/{id}"),
            id,
        })
        .collect();
    Json(listing).into_response()
}

async fn get_image(State(s): AppState, UrlPath(id): UrlPath<String>) -> Response {
    let Some(path) = s.resolve_image_id(&id) else {
        return error_response(StatusCode::NOT_FOUND, format!("unknown image {id:?}"));
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, media_type_for(&path))], bytes).into_response(),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskRequest {
    /// Image path relative to the image store root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_id: Option<String>,
    /// Inline or URL image, as on the backend wire.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<WireImage>,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

#[allow(clippy::result_large_err)]
fn resolve_ask_image(s: &ServiceState, req: &AskRequest) -> Result<ImageRef, Response> {
    match (&req.image_id, &req.image) {
        (Some(id), None) => s
            .resolve_image_id(id)
            .map(|path| ImageRef::path(id.clone(), path))
            .ok_or_else(|| error_response(StatusCode::NOT_FOUND, format!("unknown image {id:?}"))),
        (None, Some(WireImage::Url { url })) => Ok(ImageRef::url(url.clone())),
        (None, Some(image @ WireImage::Inline { b64, media_type })) => {
            let id =
                wire_image_id(image).map_err(|e| error_response(StatusCode::BAD_REQUEST, e))?;
            let data = STANDARD
                .decode(b64)
                .map_err(|e| error_response(StatusCode::BAD_REQUEST, e.to_string()))?;
            Ok(ImageRef::inline(id, media_type.clone(), data))
        }
        _ => Err(error_response(
            StatusCode::BAD_REQUEST,
            "exactly one of image_id or image is required",
        )),
    }
}

async fn run_pipeline(
    s: Arc<ServiceState>,
    image: ImageRef,
    question: String,
) -> Result<AnswerRecord, Response> {
    let result = tokio::task::spawn_blocking(move || s.pipeline.answer(&image, &question)).await;
    match result {
        Ok(Ok(record)) => Ok(record),
        Ok(Err(e)) => Err((
            StatusCode::BAD_GATEWAY,
            Json(json!({"error": e.to_string(), "stage": e.stage()})),
        )
            .into_response()),
        Err(e) => Err(error_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            e.to_string(),
        )),
    }
}

async fn ask(State(s): AppState, body: Bytes) -> Response {
    let req: AskRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    if req.question.trim().is_empty() {
        return error_response(StatusCode::BAD_REQUEST, "question is empty");
    }
    let image = match resolve_ask_image(&s, &req) {
        Ok(i) => i,
        Err(r) => return r,
    };
    match run_pipeline(s.clone(), image, req.question.clone()).await {
        Ok(record) => {
            if let Some(session) = &req.session_id {
                s.sessions.append(session, record.clone());
            }
            Json(record).into_response()
        }
        Err(r) => r,
    }
}

async fn get_session(State(s): AppState, UrlPath(id): UrlPath<String>) -> Response {
    match s.sessions.get(&id) {
        Some(log) => Json(log).into_response(),
        None => error_response(StatusCode::NOT_FOUND, format!("unknown session {id:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub question: String,
    pub expected: String,
    pub actual: Option<String>,
    pub matches: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub session_id: String,
    pub all_match: bool,
    pub results: Vec<ReplayOutcome>,
}

async fn replay(State(s): AppState, body: Bytes) -> Response {
    let log: SessionLog = match parse_body(&body) {
        Ok(l) => l,
        Err(r) => return r,
    };
    let mut results = Vec::with_capacity(log.entries.len());
    for entry in log.entries {
        let record = entry.record;
        if let ImageLocator::Path(p) = &record.image.locator {
            if !s.owns_path(p) {
                return error_response(
                    StatusCode::NOT_FOUND,
                    format!("image {:?} is not in the image store", record.image.id),
                );
            }
        }
        let outcome =
            run_pipeline(s.clone(), record.image.clone(), record.question_raw.clone()).await;
        let (actual, error) = match outcome {
            Ok(r) => (Some(r.final_answer), None),
            Err(_) => (None, Some("pipeline failed".to_string())),
        };
        results.push(ReplayOutcome {
            question: record.question_raw,
            matches: actual.as_deref() == Some(record.final_answer.as_str()),
            expected: record.final_answer,
            actual,
            error,
        });
    }
    Json(ReplayReport {
        session_id: log.session_id,
        all_match: results.iter().all(|r| r.matches),
        results,
    })
    .into_response()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    /// Path of a dataset document on the service host.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_path: Option<PathBuf>,
    /// Inline dataset document; relative image paths resolve against the image root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
}

async fn start_evaluation(State(s): AppState, body: Bytes) -> Response {
    let req: EvaluateRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    let items = match (req.dataset_path, req.dataset) {
        (Some(path), None) => crate::eval::load_dataset(&path),
        (None, Some(doc)) => doc.into_items(Some(&s.image_root)),
        _ => {
            return error_response(
                StatusCode::BAD_REQUEST,
                "exactly one of dataset_path or dataset is required",
            )
        }
    };
    let items = match items {
        Ok(items) => items,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let options = EvalOptions {
        parallelism: req.parallelism.unwrap_or(s.parallelism).clamp(1, 64),
    };

    let job = s.jobs.create();
    let id = job.id.clone();
    let state = s.clone();
    tokio::task::spawn_blocking(move || {
        match evaluate_with_progress(&state.pipeline, &items, options, &job.progress) {
            Ok(report) => job.complete(report),
            Err(crate::eval::EvalError::Cancelled) => {}
            Err(e) => job.fail(e.to_string()),
        }
    });
    (StatusCode::ACCEPTED, Json(json!({"job_id": id}))).into_response()
}

async fn get_job(State(s): AppState, UrlPath(id): UrlPath<String>) -> Response {
    match s.jobs.get(&id) {
        Some(job) => Json(job.view()).into_response(),
        None => error_response(StatusCode::NOT_FOUND, format!("unknown job {id:?}")),
    }
}

async fn cancel_job(State(s): AppState, UrlPath(id): UrlPath<String>) -> Response {
    match s.jobs.get(&id) {
        Some(job) if job.cancel() => Json(job.view()).into_response(),
        Some(_) => error_response(StatusCode::CONFLICT, format!("job {id} already finished")),
        None => error_response(StatusCode::NOT_FOUND, format!("unknown job {id:?}")),
    }
}
