//! Answer matching: project a free-form raw answer onto the closest
//! candidate by cosine similarity of text embeddings.
//!
//! Both the reference query and the candidate queries are built from the
//! unmodified question, so only the answer part differs between them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{embed_texts, BackendError, EmbeddingVector, TextEmbedder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("raw answer is empty")]
    EmptyRawAnswer,
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm embedding{}", .text.as_deref().map(|t| format!(" for {t:?}")).unwrap_or_default())]
    ZeroNorm { text: Option<String> },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateQuery {
    pub candidate: String,
    pub query_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySet {
    pub question: String,
    pub candidate_queries: Vec<CandidateQuery>,
}

impl QuerySet {
    pub fn query_texts(&self) -> impl Iterator<Item = &str> {
        self.candidate_queries.iter().map(|q| q.query_text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub selected: String,
    pub selected_index: usize,
    /// Cosine similarity per candidate, aligned with candidate order.
    pub scores: Vec<f64>,
    pub reference_query: String,
}

fn join(question: &str, answer: &str) -> String {
    format!("{question} {answer}")
}

/// One `"<question> <candidate>"` query per candidate, in order.
pub fn build_query_set<S: AsRef<str>>(
    question: &str,
    candidates: &[S],
) -> Result<QuerySet, MatchError> {
    if candidates.is_empty() {
        return Err(MatchError::EmptyCandidates);
    }
    Ok(QuerySet {
        question: question.to_string(),
        candidate_queries: candidates
            .iter()
            .map(|c| CandidateQuery {
                candidate: c.as_ref().to_string(),
                query_text: join(question, c.as_ref()),
            })
            .collect(),
    })
}

/// `"<question> <trimmed raw answer>"`.
pub fn build_reference_query(question: &str, raw_answer: &str) -> Result<String, MatchError> {
    let answer = raw_answer.trim();
    if answer.is_empty() {
        return Err(MatchError::EmptyRawAnswer);
    }
    Ok(join(question, answer))
}

/// Cosine similarity over raw slices, in f64, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, MatchError> {
    if u.len() != v.len() {
        return Err(MatchError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(MatchError::ZeroNorm { text: None });
    }
    // sqrt of the product keeps cos(u, u) at exactly 1; split it only when the product
    // leaves the representable range.
    let mut denom = (nu * nv).sqrt();
    if !denom.is_normal() {
        denom = nu.sqrt() * nv.sqrt();
    }
    Ok((dot / denom).clamp(-1.0, 1.0))
}

pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, MatchError> {
    cosine(u.values(), v.values())
}

/// Index of the first maximum. Ties go to the lowest index.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            Some(b) if s <= scores[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Score every candidate vector against the reference and pick the best.
pub fn score_candidates(
    reference: &EmbeddingVector,
    candidates: &[EmbeddingVector],
) -> Result<(Vec<f64>, usize), MatchError> {
    let scores = candidates
        .iter()
        .map(|c| cosine_similarity(reference, c))
        .collect::<Result<Vec<_>, _>>()?;
    let best = argmax_first(&scores).ok_or(MatchError::EmptyCandidates)?;
    Ok((scores, best))
}

/// Map `raw_answer` onto one of `candidates`.
///
/// The reference query and all candidate queries are embedded in a single
/// batch, reference first.
pub fn match_answer<S: AsRef<str>>(
    embedder: &dyn TextEmbedder,
    question: &str,
    candidates: &[S],
    raw_answer: &str,
) -> Result<MatchResult, MatchError> {
    let query_set = build_query_set(question, candidates)?;
    let reference_query = build_reference_query(question, raw_answer)?;

    let mut texts = Vec::with_capacity(candidates.len() + 1);
    texts.push(reference_query.clone());
    texts.extend(query_set.query_texts().map(str::to_string));
    let vectors = embed_texts(embedder, &texts)?;
    let (reference, rest) = vectors.split_first().expect("batch is non-empty");

    let (scores, selected_index) = score_candidates(reference, rest).map_err(|e| match e {
        MatchError::ZeroNorm { .. } => {
            let culprit = vectors
                .iter()
                .position(|v| v.values().iter().all(|x| *x == 0.0))
                .map(|i| texts[i].clone());
            MatchError::ZeroNorm { text: culprit }
        }
        other => other,
    })?;

    Ok(MatchResult {
        selected: query_set.candidate_queries[selected_index]
            .candidate
            .clone(),
        selected_index,
        scores,
        reference_query,
    })
}
