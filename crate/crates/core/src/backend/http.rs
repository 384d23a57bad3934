//! Blocking HTTP clients for remote backends.

use std::io;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::{
    media_type_for, EmbedRequest, EmbedResponse, ErrorResponse, GenerateRequest, GenerateResponse,
    HealthResponse, WireImage, EMBED_PATH, GENERATE_PATH, HEALTH_PATH,
};
use super::{
    check_texts, check_vectors, AnswerGenerator, BackendEndpoint, BackendError, BackendKind,
    EmbeddingVector, ImageLocator, ImageRef, TextEmbedder,
};

#[derive(Debug, Clone)]
struct Client {
    endpoint: BackendEndpoint,
    agent: ureq::Agent,
}

impl Client {
    fn new(endpoint: BackendEndpoint, expected: BackendKind) -> Result<Self, BackendError> {
        if endpoint.kind != expected {
            return Err(BackendError::WrongKind {
                url: endpoint.base_url.clone(),
                expected,
                actual: endpoint.kind,
            });
        }
        endpoint.validate().map_err(BackendError::Protocol)?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(endpoint.timeout_ms))
            .build();
        Ok(Self { endpoint, agent })
    }

    fn request(&self, method: &str, path: &str) -> ureq::Request {
        let req = self.agent.request(method, &self.endpoint.url(path));
        match &self.endpoint.auth_token {
            Some(token) => req.set("Authorization", &format!("Bearer {token}")),
            None => req,
        }
    }

    fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<R, BackendError> {
        let result = self.request("POST", path).send_json(body);
        self.read(result)
    }

    fn get<R: DeserializeOwned>(&self, path: &str) -> Result<R, BackendError> {
        let result = self.request("GET", path).call();
        self.read(result)
    }

    fn read<R: DeserializeOwned>(
        &self,
        result: Result<ureq::Response, ureq::Error>,
    ) -> Result<R, BackendError> {
        match result {
            Ok(resp) => resp
                .into_json::<R>()
                .map_err(|e| BackendError::Protocol(format!("undecodable response body: {e}"))),
            Err(ureq::Error::Status(status, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                let message = serde_json::from_str::<ErrorResponse>(&body)
                    .map(|e| e.error)
                    .unwrap_or(body);
                Err(BackendError::Status { status, message })
            }
            Err(ureq::Error::Transport(t)) => Err(self.transport_error(t)),
        }
    }

    fn transport_error(&self, t: ureq::Transport) -> BackendError {
        let timed_out = std::error::Error::source(&t)
            .and_then(|s| s.downcast_ref::<io::Error>())
            .is_some_and(|e| {
                matches!(
                    e.kind(),
                    io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock
                )
            })
            || t.to_string().contains("timed out");
        if timed_out {
            BackendError::Timeout {
                endpoint: self.endpoint.base_url.clone(),
                timeout_ms: self.endpoint.timeout_ms,
            }
        } else {
            BackendError::Transport {
                endpoint: self.endpoint.base_url.clone(),
                message: t.to_string(),
            }
        }
    }
}

/// Query `GET /v1/health` on any backend endpoint.
pub fn health(endpoint: &BackendEndpoint) -> Result<HealthResponse, BackendError> {
    let client = Client::new(endpoint.clone(), endpoint.kind)?;
    let health: HealthResponse = client.get(HEALTH_PATH)?;
    if health.status != "ok" {
        return Err(BackendError::Protocol(format!(
            "health status is {:?}",
            health.status
        )));
    }
    Ok(health)
}

/// Encode an image reference into its wire form, reading local files.
pub fn wire_image(image: &ImageRef) -> Result<WireImage, BackendError> {
    match &image.locator {
        ImageLocator::Url(url) => Ok(WireImage::Url { url: url.clone() }),
        ImageLocator::Inline { media_type, data } => Ok(WireImage::Inline {
            b64: STANDARD.encode(data),
            media_type: media_type.clone(),
        }),
        ImageLocator::Path(path) => {
            let data = std::fs::read(path)
                .map_err(|e| BackendError::Image(format!("{}: {e}", path.display())))?;
            Ok(WireImage::Inline {
                b64: STANDARD.encode(data),
                media_type: media_type_for(path).to_string(),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpGenerator {
    client: Client,
}

impl HttpGenerator {
    pub fn new(endpoint: BackendEndpoint) -> Result<Self, BackendError> {
        Ok(Self {
            client: Client::new(endpoint, BackendKind::Generator)?,
        })
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.client.endpoint
    }
}

impl AnswerGenerator for HttpGenerator {
    fn generate(&self, image: &ImageRef, question: &str) -> Result<String, BackendError> {
        let body = GenerateRequest {
            image: wire_image(image)?,
            question: question.to_string(),
        };
        let resp: GenerateResponse = self.client.post(GENERATE_PATH, &body)?;
        Ok(resp.answer)
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    client: Client,
}

impl HttpEmbedder {
    pub fn new(endpoint: BackendEndpoint) -> Result<Self, BackendError> {
        Ok(Self {
            client: Client::new(endpoint, BackendKind::Embedder)?,
        })
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.client.endpoint
    }
}

impl TextEmbedder for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        check_texts(texts)?;
        let body = EmbedRequest {
            texts: texts.to_vec(),
        };
        let resp: EmbedResponse = self.client.post(EMBED_PATH, &body)?;
        let vectors = resp
            .embeddings
            .into_iter()
            .map(EmbeddingVector::new)
            .collect::<Result<Vec<_>, _>>()?;
        check_vectors(texts.len(), &vectors)?;
        if let Some(v) = vectors.first() {
            if v.dim() != resp.dim {
                return Err(BackendError::DimensionMismatch {
                    expected: resp.dim,
                    got: v.dim(),
                });
            }
        }
        Ok(vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_kind_is_rejected() {
        let err = HttpGenerator::new(BackendEndpoint::embedder("http://127.0.0.1:9")).unwrap_err();
        assert!(matches!(err, BackendError::WrongKind { .. }));
    }

    #[test]
    fn unreachable_endpoint_is_transport_failure() {
        // Port 9 (discard) is closed on test machines.
        let gen = HttpGenerator::new(
            BackendEndpoint::generator("http://127.0.0.1:9").with_timeout_ms(2_000),
        )
        .unwrap();
        let err = gen
            .generate(&ImageRef::url("http://example.invalid/a.jpg"), "Q?")
            .unwrap_err();
        assert!(matches!(err, BackendError::Transport { .. }), "{err:?}");
    }

    #[test]
    fn missing_image_file() {
        let err = wire_image(&ImageRef::path("x", "/definitely/not/here.jpg")).unwrap_err();
        assert!(matches!(err, BackendError::Image(_)));
    }
}
