//! LRU cache in front of a text embedder.
//!
//! Candidate queries are identical for every image that asks the same
//! question, so most of an evaluation run's embedding traffic is repeats.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use lru::LruCache;
use serde::Serialize;

use crate::backend::{check_texts, embed_texts, BackendError, EmbeddingVector, TextEmbedder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub len: usize,
    pub capacity: usize,
}

pub struct EmbeddingCache {
    entries: Mutex<LruCache<String, EmbeddingVector>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl EmbeddingCache {
    pub fn new(capacity: NonZeroUsize) -> Self {
        Self {
            entries: Mutex::new(LruCache::new(capacity)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn stats(&self) -> CacheStats {
        let entries = self.entries.lock().unwrap();
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            len: entries.len(),
            capacity: entries.cap().get(),
        }
    }

    pub fn clear(&self) {
        self.entries.lock().unwrap().clear();
    }

    /// Embed `texts`, sending only cache misses to `embedder` in one batch.
    ///
    /// A failed backend batch leaves the cache untouched.
    pub fn embed(
        &self,
        embedder: &dyn TextEmbedder,
        texts: &[String],
    ) -> Result<Vec<EmbeddingVector>, BackendError> {
        check_texts(texts)?;

        let mut out: Vec<Option<EmbeddingVector>> = Vec::with_capacity(texts.len());
        let mut missing: Vec<String> = Vec::new();
        {
            let mut entries = self.entries.lock().unwrap();
            for text in texts {
                match entries.get(text) {
                    Some(v) => {
                        self.hits.fetch_add(1, Ordering::Relaxed);
                        out.push(Some(v.clone()));
                    }
                    None => {
                        self.misses.fetch_add(1, Ordering::Relaxed);
                        if !missing.contains(text) {
                            missing.push(text.clone());
                        }
                        out.push(None);
                    }
                }
            }
        }

        if !missing.is_empty() {
            let fresh = embed_texts(embedder, &missing)?;
            let dim = fresh[0].dim();
            if let Some(cached) = out.iter().flatten().find(|v| v.dim() != dim) {
                return Err(BackendError::DimensionMismatch {
                    expected: cached.dim(),
                    got: dim,
                });
            }
            let mut entries = self.entries.lock().unwrap();
            for (text, vector) in missing.iter().zip(&fresh) {
                entries.put(text.clone(), vector.clone());
            }
            for (slot, text) in out.iter_mut().zip(texts) {
                if slot.is_none() {
                    let i = missing
                        .iter()
                        .position(|m| m == text)
                        .expect("missing text");
                    *slot = Some(fresh[i].clone());
                }
            }
        }

        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }
}

/// A [`TextEmbedder`] that consults an [`EmbeddingCache`] first.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: EmbeddingCache,
}

impl<E: TextEmbedder> CachedEmbedder<E> {
    pub fn new(inner: E, capacity: NonZeroUsize) -> Self {
        Self {
            inner,
            cache: EmbeddingCache::new(capacity),
        }
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: TextEmbedder> TextEmbedder for CachedEmbedder<E> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        self.cache.embed(&self.inner, texts)
    }
}
