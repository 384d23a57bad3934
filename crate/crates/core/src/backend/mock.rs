//! Deterministic in-process backends for hermetic tests and demos.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{AnswerGenerator, BackendError, EmbeddingVector, ImageRef, TextEmbedder};

pub const MOCK_EMBEDDING_DIM: usize = 64;

/// Image key in a [`MockScript`] entry that matches any image.
pub const ANY_IMAGE: &str = "*";

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Lowercased whitespace tokens with non-alphanumeric characters stripped
/// from both edges. Tokens that strip to nothing are dropped.
pub fn mock_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Bag-of-tokens hash embedding with 64 buckets.
pub fn mock_embed(text: &str) -> Result<EmbeddingVector, BackendError> {
    MockEmbedder::default().embed_one(text)
}

/// Hash embedder with optional token aliases.
///
/// An alias rewrites a token before hashing, so `scarce -> low` makes
/// "how dense? scarce" and "how dense? low" embed identically. With no
/// aliases it is exactly [`mock_embed`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockEmbedder {
    #[serde(default)]
    pub aliases: HashMap<String, String>,
}

impl MockEmbedder {
    pub fn with_alias(mut self, from: &str, to: &str) -> Self {
        self.aliases.insert(from.to_lowercase(), to.to_lowercase());
        self
    }

    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        let tokens = mock_tokens(text);
        if tokens.is_empty() {
            return Err(BackendError::InvalidEmbedding(format!(
                "text {text:?} has no tokens"
            )));
        }
        let mut values = vec![0.0; MOCK_EMBEDDING_DIM];
        for token in &tokens {
            let token = self.aliases.get(token).unwrap_or(token);
            let bucket = (fnv1a64(token.as_bytes()) % MOCK_EMBEDDING_DIM as u64) as usize;
            values[bucket] += 1.0;
        }
        EmbeddingVector::new(values)
    }
}

impl TextEmbedder for MockEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub image: String,
    pub question: String,
    pub answer: String,
}

/// Serializable answer table for [`MockGenerator`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    #[serde(default)]
    pub entries: Vec<ScriptEntry>,
}

/// Scripted generator keyed by `(image id, question text)`.
///
/// Lookup order: exact image id, then the [`ANY_IMAGE`] wildcard, then the
/// default answer.
#[derive(Debug, Clone, Default)]
pub struct MockGenerator {
    answers: HashMap<(String, String), String>,
    default: Option<String>,
}

impl MockGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_script(script: &MockScript) -> Self {
        let mut generator = Self::new();
        for e in &script.entries {
            generator.insert(&e.image, &e.question, &e.answer);
        }
        generator.default = script.default.clone();
        generator
    }

    pub fn with_answer(mut self, image: &str, question: &str, answer: &str) -> Self {
        self.insert(image, question, answer);
        self
    }

    pub fn with_default(mut self, answer: &str) -> Self {
        self.default = Some(answer.to_string());
        self
    }

    pub fn insert(&mut self, image: &str, question: &str, answer: &str) {
        self.answers.insert(
            (image.to_string(), question.to_string()),
            answer.to_string(),
        );
    }

    pub fn lookup(&self, image_id: &str, question: &str) -> Option<&str> {
        let q = question.to_string();
        self.answers
            .get(&(image_id.to_string(), q.clone()))
            .or_else(|| self.answers.get(&(ANY_IMAGE.to_string(), q)))
            .or(self.default.as_ref())
            .map(String::as_str)
    }
}

impl AnswerGenerator for MockGenerator {
    fn generate(&self, image: &ImageRef, question: &str) -> Result<String, BackendError> {
        self.lookup(&image.id, question)
            .map(str::to_string)
            .ok_or_else(|| BackendError::MissingScript {
                image: image.id.clone(),
                question: question.to_string(),
            })
    }
}

/// Combined mock configuration, as read by `zeshot mock-backends --script`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockConfig {
    #[serde(default)]
    pub generator: MockScript,
    #[serde(default)]
    pub embedder: MockEmbedder,
}

/// Embedder wrapper that counts backend traffic.
#[derive(Debug, Default)]
pub struct InstrumentedEmbedder<E> {
    inner: E,
    calls: AtomicUsize,
    texts: Mutex<Vec<String>>,
}

impl<E> InstrumentedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
            texts: Mutex::new(Vec::new()),
        }
    }

    /// Number of `embed` batches received.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Every text received, in arrival order.
    pub fn texts_seen(&self) -> Vec<String> {
        self.texts.lock().unwrap().clone()
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
        self.texts.lock().unwrap().clear();
    }
}

impl<E: TextEmbedder> TextEmbedder for InstrumentedEmbedder<E> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.texts.lock().unwrap().extend(texts.iter().cloned());
        self.inner.embed(texts)
    }
}
