//! Per-category accuracy evaluation over image–question–answer triplets.
//!
//! Every item is scored twice: the pipeline's final answer (the mapped
//! column) and the generator's normalized raw answer (the raw column).

pub mod dataset;
pub mod report;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::ImageRef;
use crate::bank::QuestionCategory;
use crate::pipeline::{ModeApplied, Pipeline};
use crate::text::{collapse, digit_word_to_numeral, is_numeric, normalize_answer};

pub use dataset::{load_dataset, parse_dataset, DatasetDocument, DatasetError};
pub use report::{emit_report, ReportFormat};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub image: ImageRef,
    pub question: String,
    pub ground_truth: String,
    pub category: QuestionCategory,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub count: usize,
    pub correct_mapped: usize,
    pub correct_raw: usize,
    /// Percent; 0 when `count` is 0.
    pub accuracy_mapped: f64,
    pub accuracy_raw: f64,
}

impl CategoryStats {
    fn add(&mut self, outcome: &ItemOutcome) {
        self.count += 1;
        self.correct_mapped += usize::from(outcome.correct_mapped);
        self.correct_raw += usize::from(outcome.correct_raw);
    }

    fn finish(mut self) -> Self {
        if self.count > 0 {
            self.accuracy_mapped = 100.0 * self.correct_mapped as f64 / self.count as f64;
            self.accuracy_raw = 100.0 * self.correct_raw as f64 / self.count as f64;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub image: String,
    pub question: String,
    pub category: QuestionCategory,
    pub ground_truth: String,
    pub raw_answer: Option<String>,
    pub final_answer: Option<String>,
    pub mode_applied: Option<ModeApplied>,
    pub correct_mapped: bool,
    pub correct_raw: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Categories without items are absent.
    pub per_category: BTreeMap<QuestionCategory, CategoryStats>,
    pub overall: CategoryStats,
    pub error_count: usize,
    /// In input order.
    pub items: Vec<ItemOutcome>,
}

impl EvalReport {
    pub fn from_outcomes(items: Vec<ItemOutcome>) -> Self {
        let mut per_category: BTreeMap<QuestionCategory, CategoryStats> = BTreeMap::new();
        let mut overall = CategoryStats::default();
        for item in &items {
            per_category.entry(item.category).or_default().add(item);
            overall.add(item);
        }
        Self {
            per_category: per_category
                .into_iter()
                .map(|(k, v)| (k, v.finish()))
                .collect(),
            overall: overall.finish(),
            error_count: items.iter().filter(|i| i.error.is_some()).count(),
            items,
        }
    }
}

/// Exact match after normalization. Digit words ("zero" … "ten") compare
/// equal to numerals when the ground truth is numeric.
pub fn answers_equal(predicted: &str, ground_truth: &str) -> bool {
    let p = collapse(predicted);
    let g = collapse(ground_truth);
    if p == g {
        return true;
    }
    if !is_numeric(&g) {
        return false;
    }
    let as_number = |s: &str| -> Option<u64> { digit_word_to_numeral(s).unwrap_or(s).parse().ok() };
    matches!((as_number(&p), as_number(&g)), (Some(a), Some(b)) if a == b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Maximum number of items in flight.
    pub parallelism: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { parallelism: 4 }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("evaluation cancelled")]
    Cancelled,
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

/// Shared progress and cancellation state for a running evaluation.
#[derive(Debug, Default)]
pub struct EvalProgress {
    done: AtomicUsize,
    total: AtomicUsize,
    cancelled: AtomicBool,
}

impl EvalProgress {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::SeqCst)
    }

    pub fn done(&self) -> usize {
        self.done.load(Ordering::SeqCst)
    }

    pub fn total(&self) -> usize {
        self.total.load(Ordering::SeqCst)
    }
}

fn score_item(pipeline: &Pipeline, item: &EvalItem) -> ItemOutcome {
    let mut outcome = ItemOutcome {
        image: item.image.id.clone(),
        question: item.question.clone(),
        category: item.category,
        ground_truth: item.ground_truth.clone(),
        raw_answer: None,
        final_answer: None,
        mode_applied: None,
        correct_mapped: false,
        correct_raw: false,
        error: None,
    };
    match pipeline.answer(&item.image, &item.question) {
        Ok(record) => {
            let raw = normalize_answer(&record.raw_answer, false);
            outcome.correct_mapped = answers_equal(&record.final_answer, &item.ground_truth);
            outcome.correct_raw = answers_equal(&raw, &item.ground_truth);
            outcome.raw_answer = Some(record.raw_answer);
            outcome.final_answer = Some(record.final_answer);
            outcome.mode_applied = Some(record.mode_applied);
        }
        Err(e) => outcome.error = Some(e.to_string()),
    }
    outcome
}

/// Evaluate with progress reporting and cancellation.
pub fn evaluate_with_progress(
    pipeline: &Pipeline,
    items: &[EvalItem],
    options: EvalOptions,
    progress: &EvalProgress,
) -> Result<EvalReport, EvalError> {
    progress.total.store(items.len(), Ordering::SeqCst);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let outcomes: Vec<Option<ItemOutcome>> = pool.install(|| {
        items
            .par_iter()
            .map(|item| {
                if progress.is_cancelled() {
                    return None;
                }
                let outcome = score_item(pipeline, item);
                progress.done.fetch_add(1, Ordering::SeqCst);
                Some(outcome)
            })
            .collect()
    });
    if progress.is_cancelled() {
        return Err(EvalError::Cancelled);
    }
    Ok(EvalReport::from_outcomes(
        outcomes
            .into_iter()
            .map(|o| o.expect("not cancelled"))
            .collect(),
    ))
}

/// Run the pipeline over every item and aggregate per-category accuracy.
/// Backend failures count as incorrect and are tallied in `error_count`.
pub fn evaluate(pipeline: &Pipeline, items: &[EvalItem], options: EvalOptions) -> EvalReport {
    evaluate_with_progress(pipeline, items, options, &EvalProgress::new())
        .expect("uncancelled evaluation completes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_equality() {
        assert!(answers_equal("Flooded ", "flooded"));
        assert!(answers_equal("four", "4"));
        assert!(answers_equal("4", "four"));
        assert!(answers_equal("04", "4"));
        assert!(!answers_equal("3", "4"));
        assert!(!answers_equal("non-flooded", "flooded"));
        assert!(answers_equal("non  flooded", "Non flooded"));
        assert!(!answers_equal("four", "for"));
    }

    #[test]
    fn empty_report() {
        let r = EvalReport::from_outcomes(vec![]);
        assert!(r.per_category.is_empty());
        assert_eq!(r.overall.count, 0);
        assert_eq!(r.overall.accuracy_mapped, 0.0);
    }
}
