//! Dataset documents and the FloodNet annotation adapter.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::EvalItem;
use crate::backend::{ImageLocator, ImageRef};
use crate::bank::{QuestionBank, QuestionCategory};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read dataset {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed dataset: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("item {0}: missing image reference")]
    MissingImage(usize),
    #[error("item {0}: empty question")]
    EmptyQuestion(usize),
    #[error("item {0}: empty ground truth")]
    EmptyGroundTruth(usize),
    #[error("item {index}: unknown category {label:?}")]
    UnknownCategory { index: usize, label: String },
    #[error("annotation {key}: {message}")]
    Annotation { key: String, message: String },
}

/// One item in the canonical dataset document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    #[serde(default)]
    pub image: Option<String>,
    pub question: String,
    pub ground_truth: String,
    pub category: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDocument {
    pub items: Vec<DatasetRecord>,
}

impl DatasetDocument {
    /// Validate and resolve into evaluation items.
    ///
    /// Relative image paths are resolved against `base_dir`; the image id is
    /// always the string as written in the document.
    pub fn into_items(self, base_dir: Option<&Path>) -> Result<Vec<EvalItem>, DatasetError> {
        self.items
            .into_iter()
            .enumerate()
            .map(|(index, r)| {
                let image_str = r
                    .image
                    .filter(|s| !s.trim().is_empty())
                    .ok_or(DatasetError::MissingImage(index))?;
                if r.question.trim().is_empty() {
                    return Err(DatasetError::EmptyQuestion(index));
                }
                if r.ground_truth.trim().is_empty() {
                    return Err(DatasetError::EmptyGroundTruth(index));
                }
                let category: QuestionCategory =
                    r.category
                        .parse()
                        .map_err(|_| DatasetError::UnknownCategory {
                            index,
                            label: r.category.clone(),
                        })?;
                Ok(EvalItem {
                    image: resolve_image(&image_str, base_dir),
                    question: r.question,
                    ground_truth: r.ground_truth,
                    category,
                })
            })
            .collect()
    }
}

fn resolve_image(s: &str, base_dir: Option<&Path>) -> ImageRef {
    let mut image = ImageRef::from_locator_str(s);
    if let (ImageLocator::Path(p), Some(base)) = (&image.locator, base_dir) {
        if p.is_relative() {
            image.locator = ImageLocator::Path(base.join(p));
        }
    }
    image
}

pub fn parse_dataset(
    document: &str,
    base_dir: Option<&Path>,
) -> Result<Vec<EvalItem>, DatasetError> {
    let doc: DatasetDocument = serde_json::from_str(document)?;
    doc.into_items(base_dir)
}

/// Load a dataset document; relative image paths resolve against its directory.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<EvalItem>, DatasetError> {
    let path = path.as_ref();
    let document = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&document, path.parent())
}

pub const FLOODNET_ADAPTER_VERSION: &str = "floodnet-vqa/1";

/// Convert a FloodNet VQA annotation file into the canonical dataset document.
///
/// Expected layout: a JSON object keyed by annotation id, each value holding
/// `Image_ID`, `Question`, `Ground_Truth` (string or number) and
/// `Question_Type`. Categories come from the question bank when the question
/// is known; otherwise `Simple_Counting` / `Complex_Counting` question types
/// map directly, and anything else is an error. Output order follows the
/// sorted annotation keys. Best effort: the upstream layout is not versioned.
pub fn convert_floodnet(
    annotations: &str,
    image_root: &Path,
    bank: &QuestionBank,
) -> Result<DatasetDocument, DatasetError> {
    let root: serde_json::Map<String, Value> = serde_json::from_str(annotations)?;
    let mut keys: Vec<&String> = root.keys().collect();
    keys.sort();

    let mut items = Vec::with_capacity(keys.len());
    for key in keys {
        let ann = &root[key];
        let field = |name: &str| -> Result<String, DatasetError> {
            match ann.get(name) {
                Some(Value::String(s)) => Ok(s.clone()),
                Some(Value::Number(n)) => Ok(n.to_string()),
                _ => Err(DatasetError::Annotation {
                    key: key.clone(),
                    message: format!("missing field {name}"),
                }),
            }
        };
        let image_id = field("Image_ID")?;
        let question = field("Question")?;
        let ground_truth = field("Ground_Truth")?;
        let question_type = field("Question_Type").unwrap_or_default();

        let category = match bank.lookup(&question) {
            Ok(entry) => entry.category,
            Err(_) => match question_type.as_str() {
                "Simple_Counting" => QuestionCategory::SimpleCounting,
                "Complex_Counting" => QuestionCategory::ComplexCounting,
                other => {
                    return Err(DatasetError::Annotation {
                        key: key.clone(),
                        message: format!(
                            "question {question:?} (type {other:?}) is not in the bank"
                        ),
                    })
                }
            },
        };
        let image: PathBuf = image_root.join(&image_id);
        items.push(DatasetRecord {
            image: Some(image.display().to_string()),
            question,
            ground_truth,
            category: category.label().to_string(),
        });
    }
    Ok(DatasetDocument { items })
}
