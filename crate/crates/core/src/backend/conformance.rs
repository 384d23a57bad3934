//! Protocol conformance checks runnable against any backend base URL.
//!
//! The mock wire server and real model servers are held to the same suite.

use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};

use super::http::{health, HttpEmbedder, HttpGenerator};
use super::wire::{EMBED_PATH, GENERATE_PATH};
use super::{BackendEndpoint, TextEmbedder};
use crate::matcher::cosine_similarity;

/// A 1x1 PNG.
pub const PROBE_PNG_B64: &str =
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNk+M9QDwADhgGAWjR9awAAAABJRU5ErkJggg==";

pub const PROBE_QUESTION: &str = "Is the entire road flooded? yes, no";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn from_result(name: &'static str, result: Result<String, String>) -> Self {
        match result {
            Ok(detail) => Self {
                name,
                passed: true,
                detail,
            },
            Err(detail) => Self {
                name,
                passed: false,
                detail,
            },
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn raw_post(endpoint: &BackendEndpoint, path: &str, body: &Value) -> Result<(u16, Value), String> {
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_millis(endpoint.timeout_ms))
        .build();
    let mut req = agent.post(&endpoint.url(path));
    if let Some(token) = &endpoint.auth_token {
        req = req.set("Authorization", &format!("Bearer {token}"));
    }
    let resp = match req.send_json(body) {
        Ok(r) => r,
        Err(ureq::Error::Status(_, r)) => r,
        Err(e) => return Err(format!("transport: {e}")),
    };
    let status = resp.status();
    let text = resp.into_string().map_err(|e| e.to_string())?;
    let value = serde_json::from_str(&text).map_err(|e| format!("non-JSON body {text:?}: {e}"))?;
    Ok((status, value))
}

fn expect_error_body(
    endpoint: &BackendEndpoint,
    path: &str,
    body: Value,
) -> Result<String, String> {
    let (status, value) = raw_post(endpoint, path, &body)?;
    if !(400..600).contains(&status) {
        return Err(format!("expected an error status, got {status}"));
    }
    match value.get("error") {
        Some(Value::String(msg)) => Ok(format!("{status}: {msg}")),
        _ => Err(format!(
            "status {status} without an \"error\" string: {value}"
        )),
    }
}

fn check_health(endpoint: &BackendEndpoint) -> Check {
    Check::from_result(
        "health",
        health(endpoint).map_err(|e| e.to_string()).and_then(|h| {
            if h.model.trim().is_empty() {
                Err("empty model identifier".to_string())
            } else {
                Ok(format!("model {}", h.model))
            }
        }),
    )
}

/// Checks for a `/v1/generate` backend. The probe question must be answerable
/// for a 1x1 image (real models answer anything; mocks need a default).
pub fn check_generator(endpoint: &BackendEndpoint) -> Vec<Check> {
    let mut checks = vec![check_health(endpoint)];

    checks.push(Check::from_result("generate-inline-image", {
        let body = json!({
            "image": {"b64": PROBE_PNG_B64, "media_type": "image/png"},
            "question": PROBE_QUESTION,
        });
        raw_post(endpoint, GENERATE_PATH, &body).and_then(|(status, v)| {
            match (status, v.get("answer")) {
                (200, Some(Value::String(a))) if !a.trim().is_empty() => {
                    Ok(format!("answer {a:?}"))
                }
                (200, other) => Err(format!("200 without a non-empty answer: {other:?}")),
                (s, _) => Err(format!("status {s}: {v}")),
            }
        })
    }));

    checks.push(Check::from_result(
        "generate-client-roundtrip",
        HttpGenerator::new(endpoint.clone())
            .and_then(|g| {
                use super::AnswerGenerator;
                let image = super::ImageRef::inline(
                    "probe",
                    "image/png",
                    base64::Engine::decode(
                        &base64::engine::general_purpose::STANDARD,
                        PROBE_PNG_B64,
                    )
                    .expect("probe image decodes"),
                );
                g.generate(&image, PROBE_QUESTION)
            })
            .map(|a| format!("answer {a:?}"))
            .map_err(|e| e.to_string()),
    ));

    checks.push(Check::from_result(
        "generate-malformed-body",
        expect_error_body(endpoint, GENERATE_PATH, json!({"question": 1})),
    ));

    checks.push(Check::from_result(
        "generate-undecodable-image",
        expect_error_body(
            endpoint,
            GENERATE_PATH,
            json!({"image": {"b64": "%%%not base64%%%", "media_type": "image/png"}, "question": PROBE_QUESTION}),
        ),
    ));

    checks
}

/// Checks for a `/v1/embed` backend.
pub fn check_embedder(endpoint: &BackendEndpoint) -> Vec<Check> {
    let mut checks = vec![check_health(endpoint)];
    let client = match HttpEmbedder::new(endpoint.clone()) {
        Ok(c) => c,
        Err(e) => {
            checks.push(Check {
                name: "embedder-client",
                passed: false,
                detail: e.to_string(),
            });
            return checks;
        }
    };

    checks.push(Check::from_result(
        "embed-determinism",
        client
            .embed(&["a".into(), "a".into()])
            .map_err(|e| e.to_string())
            .and_then(|v| {
                if v[0] == v[1] {
                    Ok(format!("dim {}", v[0].dim()))
                } else {
                    Err("identical texts produced different vectors".into())
                }
            }),
    ));

    checks.push(Check::from_result("embed-batch-shape", {
        let body = json!({"texts": ["flooded road", "non-flooded", "low density"]});
        raw_post(endpoint, EMBED_PATH, &body).and_then(|(status, v)| {
            if status != 200 {
                return Err(format!("status {status}: {v}"));
            }
            let dim = v.get("dim").and_then(Value::as_u64).ok_or("missing dim")? as usize;
            let rows = v
                .get("embeddings")
                .and_then(Value::as_array)
                .ok_or("missing embeddings")?;
            if rows.len() != 3 {
                return Err(format!("expected 3 embeddings, got {}", rows.len()));
            }
            if rows.iter().any(|r| r.as_array().map(Vec::len) != Some(dim)) {
                return Err(format!("rows do not all have dim {dim}"));
            }
            Ok(format!("3 x {dim}"))
        })
    }));

    checks.push(Check::from_result(
        "embed-empty-batch",
        expect_error_body(endpoint, EMBED_PATH, json!({"texts": []})),
    ));

    checks.push(Check::from_result(
        "embed-empty-text",
        expect_error_body(endpoint, EMBED_PATH, json!({"texts": [""]})),
    ));

    checks.push(Check::from_result(
        "embed-malformed-body",
        expect_error_body(endpoint, EMBED_PATH, json!({"text": "a"})),
    ));

    checks.push(Check::from_result(
        "embed-distinct-texts",
        client
            .embed(&[
                "Is the road flooded? yes".into(),
                "Is the road flooded? no".into(),
            ])
            .map_err(|e| e.to_string())
            .and_then(|v| cosine_similarity(&v[0], &v[1]).map_err(|e| e.to_string()))
            .and_then(|s| {
                if s < 1.0 {
                    Ok(format!("cosine {s:.6}"))
                } else {
                    Err("distinct texts collide".into())
                }
            }),
    ));

    checks
}
