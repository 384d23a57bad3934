//! HTTP hosting: a background-thread server handle, and the mock backends
//! exposed over the wire protocol.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};
use tokio::sync::oneshot;

use super::mock::{MockConfig, MockEmbedder, MockGenerator, MOCK_EMBEDDING_DIM};
use super::wire::{
    EmbedRequest, EmbedResponse, ErrorResponse, GenerateRequest, GenerateResponse, HealthResponse,
    WireImage, EMBED_PATH, GENERATE_PATH, HEALTH_PATH,
};
use super::{check_texts, AnswerGenerator, BackendError, ImageRef, TextEmbedder};

/// An axum server running on its own thread and runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    /// Bind synchronously (so address errors surface here), then serve in the background.
    pub fn spawn(router: Router, addr: SocketAddr) -> io::Result<Self> {
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name(format!("http-{}", addr.port()))
            .spawn(move || {
                let runtime = tokio::runtime::Builder::new_multi_thread()
                    .enable_all()
                    .build()?;
                runtime.block_on(async move {
                    let listener = tokio::net::TcpListener::from_std(listener)?;
                    axum::serve(listener, router)
                        .with_graceful_shutdown(async {
                            let _ = rx.await;
                        })
                        .await
                })
            })?;
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stop accepting connections, drain in-flight requests and join.
    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .map_err(|_| io::Error::other("server thread panicked"))?,
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

pub(crate) fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (
        status,
        Json(ErrorResponse {
            error: message.into(),
        }),
    )
        .into_response()
}

#[allow(clippy::result_large_err)]
pub(crate) fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body)
        .map_err(|e| error_response(StatusCode::BAD_REQUEST, format!("malformed request: {e}")))
}

/// The in-process mocks behind the wire protocol.
#[derive(Debug, Clone, Default)]
pub struct MockBackends {
    pub generator: MockGenerator,
    pub embedder: MockEmbedder,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub auth_token: Option<String>,
}

impl MockBackends {
    pub fn from_config(config: &MockConfig) -> Self {
        Self {
            generator: MockGenerator::from_script(&config.generator),
            embedder: config.embedder.clone(),
            auth_token: None,
        }
    }

    pub fn router(self) -> Router {
        Router::new()
            .route(HEALTH_PATH, get(mock_health))
            .route(GENERATE_PATH, post(mock_generate))
            .route(EMBED_PATH, post(mock_embed_handler))
            .with_state(Arc::new(self))
    }

    pub fn spawn(self, addr: SocketAddr) -> io::Result<ServerHandle> {
        ServerHandle::spawn(self.router(), addr)
    }

    #[allow(clippy::result_large_err)]
    fn authorize(&self, headers: &HeaderMap) -> Result<(), Response> {
        let Some(token) = &self.auth_token else {
            return Ok(());
        };
        let expected = format!("Bearer {token}");
        match headers.get("authorization").and_then(|v| v.to_str().ok()) {
            Some(v) if v == expected => Ok(()),
            _ => Err(error_response(
                StatusCode::UNAUTHORIZED,
                "missing or invalid bearer token",
            )),
        }
    }
}

/// Image id used by the mock wire server: the URL, or `sha256:<hex>` of inline bytes.
pub fn wire_image_id(image: &WireImage) -> Result<String, String> {
    match image {
        WireImage::Url { url } => Ok(url.clone()),
        WireImage::Inline { b64, .. } => {
            let data = STANDARD
                .decode(b64)
                .map_err(|e| format!("undecodable image: {e}"))?;
            let digest = Sha256::digest(&data);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            Ok(format!("sha256:{hex}"))
        }
    }
}

async fn mock_health(State(mocks): State<Arc<MockBackends>>, headers: HeaderMap) -> Response {
    if let Err(r) = mocks.authorize(&headers) {
        return r;
    }
    Json(HealthResponse {
        status: "ok".into(),
        model: format!("mock-hash-embedder-{MOCK_EMBEDDING_DIM}+scripted-generator"),
    })
    .into_response()
}

async fn mock_generate(
    State(mocks): State<Arc<MockBackends>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    if let Err(r) = mocks.authorize(&headers) {
        return r;
    }
    let req: GenerateRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    if req.question.trim().is_empty() {
        return error_response(StatusCode::BAD_REQUEST, "question is empty");
    }
    let id = match wire_image_id(&req.image) {
        Ok(id) => id,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e),
    };
    let image = ImageRef::url(id);
    match mocks.generator.generate(&image, &req.question) {
        Ok(answer) => Json(GenerateResponse { answer }).into_response(),
        Err(e @ BackendError::MissingScript { .. }) => {
            error_response(StatusCode::NOT_FOUND, e.to_string())
        }
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn mock_embed_handler(
    State(mocks): State<Arc<MockBackends>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    if let Err(r) = mocks.authorize(&headers) {
        return r;
    }
    let req: EmbedRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    if let Err(e) = check_texts(&req.texts) {
        return error_response(StatusCode::BAD_REQUEST, e.to_string());
    }
    match mocks.embedder.embed(&req.texts) {
        Ok(vectors) => Json(EmbedResponse {
            dim: MOCK_EMBEDDING_DIM,
            embeddings: vectors.into_iter().map(Into::into).collect(),
        })
        .into_response(),
        Err(e) => error_response(StatusCode::BAD_REQUEST, e.to_string()),
    }
}
