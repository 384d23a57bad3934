//! Zero-shot visual question answering for post-disaster imagery.
//!
//! The pipeline has three stages:
//!
//! 1. **Prompt modification**: constrained questions (yes/no and multiple
//!    choice) get their candidate answers appended before being sent to the
//!    answer generator. Counting questions pass through unchanged.
//! 2. **Answer generation**: an opaque vision-language backend produces a
//!    free-form raw answer for the image and (modified) question.
//! 3. **Answer matching**: the raw answer is projected onto the closest
//!    candidate by cosine similarity of text embeddings, so constrained
//!    questions always receive an in-set answer.
//!
//! Model inference lives behind a small HTTP wire protocol ([`backend`]);
//! deterministic mocks make every stage testable without model weights.

pub mod backend;
pub mod bank;
pub mod cache;
pub mod eval;
pub mod matcher;
pub mod pipeline;
pub mod service;
pub mod text;

pub use backend::{
    AnswerGenerator, BackendEndpoint, BackendError, BackendKind, EmbeddingVector, ImageLocator,
    ImageRef, RawAnswer, TextEmbedder,
};
pub use bank::{AnswerMode, BankError, QuestionBank, QuestionCategory, QuestionEntry};
pub use cache::{CachedEmbedder, EmbeddingCache};
pub use eval::{EvalItem, EvalReport};
pub use matcher::{MatchError, MatchResult, QuerySet};
pub use pipeline::{AnswerRecord, ModeApplied, Pipeline, PipelineError, Stage};
