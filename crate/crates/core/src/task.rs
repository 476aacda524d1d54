//! Benchmark task instances shared by prompting, strategies and scoring.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Broad task family. Determines answer extraction, footer text and metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "qa")]
    Qa,
    #[serde(rename = "code")]
    Code,
    #[serde(rename = "math")]
    Math,
    #[serde(rename = "image_qa")]
    ImageQa,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Qa => "qa",
            TaskKind::Code => "code",
            TaskKind::Math => "math",
            TaskKind::ImageQa => "image_qa",
        }
    }
}

/// Reference to an image on disk. The payload is read only when a request is built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_type: Option<String>,
}

impl ImageRef {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            media_type: None,
        }
    }

    /// Media type from the explicit field, else guessed from the file extension.
    pub fn resolved_media_type(&self) -> String {
        if let Some(mt) = &self.media_type {
            return mt.clone();
        }
        let ext = self
            .path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("png") => "image/png",
            Some("gif") => "image/gif",
            Some("webp") => "image/webp",
            _ => "image/jpeg",
        }
        .to_string()
    }
}

/// One executable test case of a code task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub name: String,
    pub code: String,
}

/// Unit tests for a code task: shared setup source followed by independent cases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    #[serde(default)]
    pub setup: String,
    pub cases: Vec<TestCase>,
}

/// What a task is scored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Gold {
    /// Any of these strings is acceptable (QA, Math, free-form image QA).
    Answers { answers: Vec<String> },
    /// Code must pass every case.
    Tests { suite: TestSuite },
    /// Multiple choice: `answer` is an option letter or the text of one option.
    Choice { answer: String, choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub kind: TaskKind,
    pub statement: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<ImageRef>,
    pub gold: Gold,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

/// Broken kind invariant of a task.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskInvariantError {
    #[error("task statement is empty")]
    EmptyStatement,
    #[error("code task needs a non-empty test suite")]
    MissingTests,
    #[error("math task needs exactly one gold answer, found {0}")]
    MathGoldCount(usize),
    #[error("image QA task carries no image")]
    MissingImage,
    #[error("gold of type {gold} does not fit a {kind} task")]
    GoldMismatch { kind: &'static str, gold: &'static str },
    #[error("gold answer list is empty")]
    EmptyAnswers,
    #[error("multiple-choice gold {0:?} is not among the options")]
    ChoiceNotListed(String),
}

impl TaskInstance {
    pub fn new(id: impl Into<String>, kind: TaskKind, statement: impl Into<String>, gold: Gold) -> Self {
        Self {
            id: id.into(),
            kind,
            statement: statement.into(),
            context: None,
            images: Vec::new(),
            gold,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = Some(context.into());
        self
    }

    pub fn with_image(mut self, image: ImageRef) -> Self {
        self.images.push(image);
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Options of a multiple-choice task, empty otherwise.
    pub fn choices(&self) -> &[String] {
        match &self.gold {
            Gold::Choice { choices, .. } => choices,
            _ => &[],
        }
    }

    /// Checks the per-kind invariants.
    pub fn validate(&self) -> Result<(), TaskInvariantError> {
        if self.statement.trim().is_empty() {
            return Err(TaskInvariantError::EmptyStatement);
        }
        let gold_name = match &self.gold {
            Gold::Answers { .. } => "answers",
            Gold::Tests { .. } => "tests",
            Gold::Choice { .. } => "choice",
        };
        let mismatch = || TaskInvariantError::GoldMismatch {
            kind: self.kind.as_str(),
            gold: gold_name,
        };
        match (self.kind, &self.gold) {
            (TaskKind::Code, Gold::Tests { suite }) => {
                if suite.cases.is_empty() {
                    return Err(TaskInvariantError::MissingTests);
                }
            }
            (TaskKind::Code, _) => return Err(TaskInvariantError::MissingTests),
            (TaskKind::Math, Gold::Answers { answers }) => {
                if answers.len() != 1 {
                    return Err(TaskInvariantError::MathGoldCount(answers.len()));
                }
            }
            (TaskKind::Qa, Gold::Answers { answers }) | (TaskKind::ImageQa, Gold::Answers { answers }) => {
                if answers.is_empty() {
                    return Err(TaskInvariantError::EmptyAnswers);
                }
            }
            (TaskKind::ImageQa, Gold::Choice { answer, choices }) => {
                if crate::eval::resolve_choice(answer, choices).is_none() {
                    return Err(TaskInvariantError::ChoiceNotListed(answer.clone()));
                }
            }
            _ => return Err(mismatch()),
        }
        if self.kind == TaskKind::ImageQa && self.images.is_empty() {
            return Err(TaskInvariantError::MissingImage);
        }
        Ok(())
    }
}
