//! The question bank: every unique question, its category, and its ordered
//! candidate answers. Also home of prompt modification.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{collapse, normalize_question};

/// Reference bank covering the FloodNet example questions.
pub const FLOODNET_REFERENCE_BANK: &str = include_str!("../fixtures/floodnet_bank.json");

#[derive(Debug, Error)]
pub enum BankError {
    #[error("failed to read question bank {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed question bank: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown question category {0:?}")]
    UnknownCategory(String),
    #[error("duplicate question {0:?}")]
    DuplicateQuestion(String),
    #[error("empty question text")]
    EmptyQuestion,
    #[error("question {question:?}: category {category} requires mode {expected}")]
    ModeMismatch {
        question: String,
        category: QuestionCategory,
        expected: AnswerMode,
    },
    #[error("constrained question {0:?} needs at least two distinct candidate answers")]
    TooFewCandidates(String),
    #[error("question {question:?} lists candidate {candidate:?} more than once")]
    DuplicateCandidate { question: String, candidate: String },
    #[error("counting question {0:?} must not list candidate answers")]
    CountingWithCandidates(String),
    #[error("unknown question {0:?}")]
    UnknownQuestion(String),
}

/// The seven question types, declared in report row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionCategory {
    BuildingCondition,
    ComplexCounting,
    DensityEstimation,
    EntireCondition,
    RiskAssessment,
    RoadCondition,
    SimpleCounting,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 7] = [
        QuestionCategory::BuildingCondition,
        QuestionCategory::ComplexCounting,
        QuestionCategory::DensityEstimation,
        QuestionCategory::EntireCondition,
        QuestionCategory::RiskAssessment,
        QuestionCategory::RoadCondition,
        QuestionCategory::SimpleCounting,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QuestionCategory::BuildingCondition => "building-condition",
            QuestionCategory::ComplexCounting => "complex-counting",
            QuestionCategory::DensityEstimation => "density-estimation",
            QuestionCategory::EntireCondition => "entire-condition",
            QuestionCategory::RiskAssessment => "risk-assessment",
            QuestionCategory::RoadCondition => "road-condition",
            QuestionCategory::SimpleCounting => "simple-counting",
        }
    }

    /// Human-readable row name used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            QuestionCategory::BuildingCondition => "Building Condition",
            QuestionCategory::ComplexCounting => "Complex Counting",
            QuestionCategory::DensityEstimation => "Density Estimation",
            QuestionCategory::EntireCondition => "Entire Condition",
            QuestionCategory::RiskAssessment => "Risk Assessment",
            QuestionCategory::RoadCondition => "Road Condition",
            QuestionCategory::SimpleCounting => "Simple Counting",
        }
    }

    pub fn is_counting(self) -> bool {
        matches!(
            self,
            QuestionCategory::ComplexCounting | QuestionCategory::SimpleCounting
        )
    }

    /// The only answer mode a question of this category may use.
    pub fn required_mode(self) -> AnswerMode {
        if self.is_counting() {
            AnswerMode::Open
        } else {
            AnswerMode::Constrained
        }
    }
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for QuestionCategory {
    type Err = BankError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QuestionCategory::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| BankError::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerMode {
    /// Yes/no or multiple choice: the prompt is modified and the answer mapped.
    Constrained,
    /// Counting: the prompt is left alone and the raw answer passed through.
    Open,
}

impl fmt::Display for AnswerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnswerMode::Constrained => "constrained",
            AnswerMode::Open => "open",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionEntry {
    /// Question text as loaded (trimmed). Lookup goes through its normalized form.
    pub question: String,
    pub category: QuestionCategory,
    pub mode: AnswerMode,
    /// Candidate answers in bank order; empty for open questions.
    pub answers: Vec<String>,
}

impl QuestionEntry {
    pub fn normalized_question(&self) -> String {
        normalize_question(&self.question)
    }

    /// The question sent to the answer generator.
    pub fn modified_prompt(&self) -> String {
        match self.mode {
            AnswerMode::Open => self.question.clone(),
            AnswerMode::Constrained => modify_prompt(&self.question, &self.answers),
        }
    }
}

/// Append the candidates to the question: `"<question> <a1>, <a2>, …"`.
///
/// With no candidates the question is returned unchanged.
pub fn modify_prompt<S: AsRef<str>>(question: &str, candidates: &[S]) -> String {
    if candidates.is_empty() {
        return question.to_string();
    }
    let joined = candidates
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(", ");
    format!("{question} {joined}")
}

#[derive(Deserialize)]
struct RawDocument {
    questions: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    question: String,
    category: String,
    mode: AnswerMode,
    #[serde(default)]
    answers: Vec<String>,
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    questions: &'a [QuestionEntry],
}

/// Immutable dictionary from normalized question text to its entry.
#[derive(Debug, Clone, Default)]
pub struct QuestionBank {
    entries: Vec<QuestionEntry>,
    index: HashMap<String, usize>,
}

impl PartialEq for QuestionBank {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl QuestionBank {
    pub fn from_json(document: &str) -> Result<Self, BankError> {
        let raw: RawDocument = serde_json::from_str(document)?;
        let entries = raw
            .questions
            .into_iter()
            .map(|r| {
                let category = r.category.parse()?;
                Ok(QuestionEntry {
                    question: r.question.trim().to_string(),
                    category,
                    mode: r.mode,
                    answers: r.answers.iter().map(|a| a.trim().to_string()).collect(),
                })
            })
            .collect::<Result<Vec<_>, BankError>>()?;
        Self::from_entries(entries)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, BankError> {
        let path = path.as_ref();
        let document = std::fs::read_to_string(path).map_err(|source| BankError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&document)
    }

    /// The bundled reference bank.
    pub fn floodnet_reference() -> Self {
        Self::from_json(FLOODNET_REFERENCE_BANK).expect("bundled bank is valid")
    }

    pub fn from_entries(entries: Vec<QuestionEntry>) -> Result<Self, BankError> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            validate_entry(entry)?;
            let key = entry.normalized_question();
            if index.insert(key.clone(), i).is_some() {
                return Err(BankError::DuplicateQuestion(key));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn lookup(&self, question: &str) -> Result<&QuestionEntry, BankError> {
        let key = normalize_question(question);
        self.index
            .get(&key)
            .map(|&i| &self.entries[i])
            .ok_or(BankError::UnknownQuestion(key))
    }

    pub fn entries(&self) -> &[QuestionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical JSON document; loading it yields an equal bank.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DocumentRef {
            questions: &self.entries,
        })
        .expect("bank serializes")
    }
}

impl Serialize for QuestionBank {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DocumentRef {
            questions: &self.entries,
        }
        .serialize(serializer)
    }
}

fn validate_entry(entry: &QuestionEntry) -> Result<(), BankError> {
    if entry.question.trim().is_empty() {
        return Err(BankError::EmptyQuestion);
    }
    let expected = entry.category.required_mode();
    if entry.mode != expected {
        if entry.category.is_counting() && !entry.answers.is_empty() {
            return Err(BankError::CountingWithCandidates(entry.question.clone()));
        }
        return Err(BankError::ModeMismatch {
            question: entry.question.clone(),
            category: entry.category,
            expected,
        });
    }
    match entry.mode {
        AnswerMode::Open if !entry.answers.is_empty() => {
            Err(BankError::CountingWithCandidates(entry.question.clone()))
        }
        AnswerMode::Open => Ok(()),
        AnswerMode::Constrained => {
            let mut seen = Vec::with_capacity(entry.answers.len());
            for answer in &entry.answers {
                let norm = collapse(answer);
                if norm.is_empty() {
                    continue;
                }
                if seen.contains(&norm) {
                    return Err(BankError::DuplicateCandidate {
                        question: entry.question.clone(),
                        candidate: answer.clone(),
                    });
                }
                seen.push(norm);
            }
            if seen.len() < 2 || seen.len() != entry.answers.len() {
                return Err(BankError::TooFewCandidates(entry.question.clone()));
            }
            Ok(())
        }
    }
}
