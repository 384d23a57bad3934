//! End-to-end question answering: lookup, prompt modification, generation,
//! and (for constrained questions) answer matching.

use std::num::NonZeroUsize;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{generate_answer, AnswerGenerator, BackendError, ImageRef, TextEmbedder};
use crate::bank::{AnswerMode, QuestionBank, QuestionEntry};
use crate::cache::{CacheStats, CachedEmbedder};
use crate::matcher::{match_answer, MatchError, MatchResult};
use crate::text::normalize_answer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Generation,
    Matching,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Generation => "generation",
            Stage::Matching => "matching",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("generation stage: {0}")]
    Generation(#[source] BackendError),
    #[error("matching stage: {0}")]
    Matching(#[source] MatchError),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Generation(_) => Stage::Generation,
            PipelineError::Matching(_) => Stage::Matching,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeApplied {
    /// Constrained question: raw answer mapped onto a candidate.
    Mapped,
    /// Counting question: normalized raw answer returned.
    Passthrough,
    /// Question not in the bank: normalized raw answer returned, record flagged.
    FallbackRaw,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub lookup_ms: f64,
    pub generation_ms: f64,
    pub matching_ms: f64,
    pub total_ms: f64,
}

/// Full trace of one question about one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub image: ImageRef,
    pub question_raw: String,
    pub question_entry: Option<QuestionEntry>,
    pub modified_question: String,
    pub raw_answer: String,
    #[serde(rename = "match")]
    pub match_result: Option<MatchResult>,
    pub final_answer: String,
    pub mode_applied: ModeApplied,
    /// Set when the question was not found in the bank.
    pub flagged: bool,
    pub timings: StageTimings,
}

impl AnswerRecord {
    /// Copy with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: StageTimings::default(),
            ..self.clone()
        }
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}

type SharedCache = Arc<CachedEmbedder<Arc<dyn TextEmbedder>>>;

#[derive(Clone)]
pub struct Pipeline {
    bank: Arc<QuestionBank>,
    generator: Arc<dyn AnswerGenerator>,
    embedder: Arc<dyn TextEmbedder>,
    cache: Option<SharedCache>,
}

impl Pipeline {
    pub fn new(
        bank: impl Into<Arc<QuestionBank>>,
        generator: Arc<dyn AnswerGenerator>,
        embedder: Arc<dyn TextEmbedder>,
    ) -> Self {
        Self {
            bank: bank.into(),
            generator,
            embedder,
            cache: None,
        }
    }

    /// Put an LRU embedding cache in front of the embedder.
    pub fn with_cache(mut self, capacity: NonZeroUsize) -> Self {
        let base = match &self.cache {
            Some(c) => c.inner().clone(),
            None => self.embedder.clone(),
        };
        let cached: SharedCache = Arc::new(CachedEmbedder::new(base, capacity));
        self.embedder = cached.clone();
        self.cache = Some(cached);
        self
    }

    pub fn bank(&self) -> &QuestionBank {
        &self.bank
    }

    pub fn cache_stats(&self) -> Option<CacheStats> {
        self.cache.as_ref().map(|c| c.cache().stats())
    }

    pub fn answer(&self, image: &ImageRef, question: &str) -> Result<AnswerRecord, PipelineError> {
        let start = Instant::now();
        let mut timings = StageTimings::default();

        let entry = self.bank.lookup(question).ok().cloned();
        let modified_question = match &entry {
            Some(e) => e.modified_prompt(),
            None => question.trim().to_string(),
        };
        timings.lookup_ms = ms_since(start);

        let gen_start = Instant::now();
        let raw = generate_answer(self.generator.as_ref(), image, &modified_question)
            .map_err(PipelineError::Generation)?;
        timings.generation_ms = ms_since(gen_start);

        let (mode_applied, match_result, final_answer) = match &entry {
            Some(e) if e.mode == AnswerMode::Constrained => {
                let match_start = Instant::now();
                let m = match_answer(self.embedder.as_ref(), &e.question, &e.answers, &raw.text)
                    .map_err(PipelineError::Matching)?;
                timings.matching_ms = ms_since(match_start);
                let selected = m.selected.clone();
                (ModeApplied::Mapped, Some(m), selected)
            }
            Some(_) => (
                ModeApplied::Passthrough,
                None,
                normalize_answer(&raw.text, true),
            ),
            None => (
                ModeApplied::FallbackRaw,
                None,
                normalize_answer(&raw.text, false),
            ),
        };
        timings.total_ms = ms_since(start);

        Ok(AnswerRecord {
            image: image.clone(),
            question_raw: question.to_string(),
            flagged: entry.is_none(),
            question_entry: entry,
            modified_question,
            raw_answer: raw.text,
            match_result,
            final_answer,
            mode_applied,
            timings,
        })
    }
}
