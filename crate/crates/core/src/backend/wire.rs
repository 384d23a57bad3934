//! JSON bodies of the backend wire protocol.
//!
//! ```text
//! POST /v1/generate  {"image": {"b64", "media_type"} | {"url"}, "question"} -> {"answer"}
//! POST /v1/embed     {"texts": [..]}                                       -> {"dim", "embeddings"}
//! GET  /v1/health                                                          -> {"status": "ok", "model"}
//! errors: 4xx/5xx {"error"}
//! ```

use serde::{Deserialize, Serialize};

pub const GENERATE_PATH: &str = "/v1/generate";
pub const EMBED_PATH: &str = "/v1/embed";
pub const HEALTH_PATH: &str = "/v1/health";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireImage {
    Inline { b64: String, media_type: String },
    Url { url: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub image: WireImage,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dim: usize,
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

/// Media type guessed from a file extension.
pub fn media_type_for(path: &std::path::Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("tif" | "tiff") => "image/tiff",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_forms_serialize_flat() {
        let inline = GenerateRequest {
            image: WireImage::Inline {
                b64: "AQID".into(),
                media_type: "image/png".into(),
            },
            question: "Q?".into(),
        };
        assert_eq!(
            serde_json::to_string(&inline).unwrap(),
            r#"{"image":{"b64":"AQID","media_type":"image/png"},"question":"Q?"}"#
        );
        let url: GenerateRequest =
            serde_json::from_str(r#"{"image": {"url": "http://x/1.jpg"}, "question": "Q?"}"#)
                .unwrap();
        assert_eq!(
            url.image,
            WireImage::Url {
                url: "http://x/1.jpg".into()
            }
        );
    }

    #[test]
    fn media_types() {
        assert_eq!(media_type_for("a/B.JPG".as_ref()), "image/jpeg");
        assert_eq!(media_type_for("a.png".as_ref()), "image/png");
        assert_eq!(media_type_for("noext".as_ref()), "application/octet-stream");
    }
}
