//! Contracts for the two model backends: the answer generator and the text
//! embedder. Remote implementations speak the JSON wire protocol in
//! [`wire`]; [`mock`] holds deterministic in-process stand-ins.

pub mod conformance;
pub mod http;
pub mod mock;
pub mod server;
pub mod wire;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpEmbedder, HttpGenerator};
pub use mock::{mock_embed, MockEmbedder, MockGenerator, MockScript};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport failure talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("request to {endpoint} timed out after {timeout_ms} ms")]
    Timeout { endpoint: String, timeout_ms: u64 },
    #[error("backend returned status {status}: {message}")]
    Status { status: u16, message: String },
    #[error("backend response violates the protocol: {0}")]
    Protocol(String),
    #[error("backend generated an empty answer")]
    EmptyAnswer,
    #[error("embedding batch is empty")]
    EmptyBatch,
    #[error("text at position {0} is empty")]
    EmptyText(usize),
    #[error("expected {expected} embeddings, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("endpoint {url} is a {actual} endpoint, expected {expected}")]
    WrongKind {
        url: String,
        expected: BackendKind,
        actual: BackendKind,
    },
    #[error("cannot read image {0}")]
    Image(String),
    #[error("no scripted answer for image {image:?} and question {question:?}")]
    MissingScript { image: String, question: String },
}

/// Where the image bytes live. Exactly one form is set by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageLocator {
    Path(PathBuf),
    Url(String),
    Inline {
        media_type: String,
        #[serde(with = "b64")]
        data: Vec<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub id: String,
    pub locator: ImageLocator,
}

impl ImageRef {
    pub fn path(id: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        Self {
            id: id.into(),
            locator: ImageLocator::Path(path.into()),
        }
    }

    pub fn url(url: impl Into<String>) -> Self {
        let url = url.into();
        Self {
            id: url.clone(),
            locator: ImageLocator::Url(url),
        }
    }

    pub fn inline(id: impl Into<String>, media_type: impl Into<String>, data: Vec<u8>) -> Self {
        Self {
            id: id.into(),
            locator: ImageLocator::Inline {
                media_type: media_type.into(),
                data,
            },
        }
    }

    /// Interpret a dataset/CLI image string: http(s) URLs stay URLs,
    /// everything else is a filesystem path. The string itself is the id.
    pub fn from_locator_str(s: &str) -> Self {
        if s.starts_with("http://") || s.starts_with("https://") {
            Self::url(s)
        } else {
            Self::path(s, s)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAnswer {
    pub text: String,
    pub latency_ms: u64,
}

/// Output of a text embedder. Always non-empty and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, BackendError> {
        if values.is_empty() {
            return Err(BackendError::InvalidEmbedding(
                "zero-dimensional vector".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(BackendError::InvalidEmbedding(format!(
                "non-finite component at index {i}"
            )));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = BackendError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Generator,
    Embedder,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Generator => "generator",
            BackendKind::Embedder => "embedder",
        })
    }
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT_MS
}

/// Connection details for a remote backend. Model weights are opaque remote state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendEndpoint {
    pub base_url: String,
    pub kind: BackendKind,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token: Option<String>,
}

impl BackendEndpoint {
    pub fn new(base_url: impl Into<String>, kind: BackendKind) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            kind,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            auth_token: None,
        }
    }

    pub fn generator(base_url: impl Into<String>) -> Self {
        Self::new(base_url, BackendKind::Generator)
    }

    pub fn embedder(base_url: impl Into<String>) -> Self {
        Self::new(base_url, BackendKind::Embedder)
    }

    pub fn with_timeout_ms(mut self, timeout_ms: u64) -> Self {
        self.timeout_ms = timeout_ms;
        self
    }

    pub fn with_auth_token(mut self, token: impl Into<String>) -> Self {
        self.auth_token = Some(token.into());
        self
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), path)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.timeout_ms == 0 {
            return Err(format!(
                "{} endpoint timeout_ms must be positive",
                self.kind
            ));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(format!(
                "{} endpoint base_url {:?} is not an http(s) URL",
                self.kind, self.base_url
            ));
        }
        Ok(())
    }
}

/// The answer generator `f(image, question)`.
pub trait AnswerGenerator: Send + Sync {
    /// Return the backend's answer verbatim.
    fn generate(&self, image: &ImageRef, question: &str) -> Result<String, BackendError>;
}

/// The text embedder `g(text)`.
pub trait TextEmbedder: Send + Sync {
    /// One vector per input text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError>;
}

impl<T: AnswerGenerator + ?Sized> AnswerGenerator for Arc<T> {
    fn generate(&self, image: &ImageRef, question: &str) -> Result<String, BackendError> {
        (**self).generate(image, question)
    }
}

impl<T: TextEmbedder + ?Sized> TextEmbedder for Arc<T> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        (**self).embed(texts)
    }
}

/// Run the generator and enforce the non-empty answer contract.
pub fn generate_answer(
    generator: &dyn AnswerGenerator,
    image: &ImageRef,
    question: &str,
) -> Result<RawAnswer, BackendError> {
    let start = Instant::now();
    let text = generator.generate(image, question)?;
    if text.trim().is_empty() {
        return Err(BackendError::EmptyAnswer);
    }
    Ok(RawAnswer {
        text,
        latency_ms: start.elapsed().as_millis() as u64,
    })
}

/// Run the embedder and enforce the batch contract: non-empty inputs, one
/// vector per input, a single shared dimension.
pub fn embed_texts(
    embedder: &dyn TextEmbedder,
    texts: &[String],
) -> Result<Vec<EmbeddingVector>, BackendError> {
    check_texts(texts)?;
    let vectors = embedder.embed(texts)?;
    check_vectors(texts.len(), &vectors)?;
    Ok(vectors)
}

pub(crate) fn check_texts(texts: &[String]) -> Result<(), BackendError> {
    if texts.is_empty() {
        return Err(BackendError::EmptyBatch);
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(BackendError::EmptyText(i));
    }
    Ok(())
}

pub(crate) fn check_vectors(
    expected: usize,
    vectors: &[EmbeddingVector],
) -> Result<(), BackendError> {
    if vectors.len() != expected {
        return Err(BackendError::CountMismatch {
            expected,
            got: vectors.len(),
        });
    }
    if let Some(first) = vectors.first() {
        let dim = first.dim();
        if let Some(bad) = vectors.iter().find(|v| v.dim() != dim) {
            return Err(BackendError::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
    }
    Ok(())
}

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(data: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(data))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let encoded = String::deserialize(d)?;
        STANDARD.decode(encoded).map_err(serde::de::Error::custom)
    }
}
