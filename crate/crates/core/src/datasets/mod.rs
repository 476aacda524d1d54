//! Benchmark loading, sampling and validation/test splitting.
//!
//! Every adapter maps its source schema onto [`TaskInstance`]. The internal
//! normalized format is JSONL with one serialized `TaskInstance` per line.
//! Image paths are resolved against a dataset root (by default the directory
//! holding the dataset file); image bytes are only read when a request is built.

mod adapters;
mod sampling;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::task::TaskInstance;

pub use adapters::Adapter;
pub use sampling::{
    category_counts, sample_qa, select_math_subset, shuffled_indices, split_tasks, SplitSpec, MATH_CATEGORIES,
    MATH_LEVELS, MATH_SUBSET_SIZE,
};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("unknown dataset adapter {0:?}")]
    UnknownAdapter(String),
    #[error("{path}: {location}: {message}")]
    Schema {
        path: String,
        location: String,
        message: String,
    },
    #[error("duplicate task id {0:?}")]
    DuplicateId(String),
    #[error("cannot sample {requested} tasks from {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("task {id} lacks metadata field {field:?}")]
    MissingMetadata { id: String, field: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadMode {
    /// Any malformed record aborts the load.
    #[default]
    Strict,
    /// Malformed records are reported and skipped.
    Lenient,
}

/// A record that did not become a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordIssue {
    /// `line N` for JSONL sources, `record N` for JSON documents (1-based).
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub tasks: Vec<TaskInstance>,
    /// Malformed records skipped in lenient mode.
    pub skipped: Vec<RecordIssue>,
    /// Records the adapter excludes by definition (e.g. image-less ScienceQA items).
    pub filtered: Vec<RecordIssue>,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub mode: LoadMode,
    /// Base directory for relative image paths; defaults to the file's directory.
    pub root: Option<PathBuf>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            mode: LoadMode::Strict,
            root: None,
        }
    }
}

/// Loads `path` through the named adapter in strict mode.
pub fn load_dataset(path: &Path, adapter: &str) -> Result<Vec<TaskInstance>, DatasetError> {
    let adapter: Adapter = adapter.parse()?;
    Ok(load_with(path, adapter, &LoadOptions::default())?.tasks)
}

pub fn load_with(path: &Path, adapter: Adapter, options: &LoadOptions) -> Result<LoadReport, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let root = options
        .root
        .clone()
        .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    let records = adapters::records(adapter, &text).map_err(|(location, message)| DatasetError::Schema {
        path: path.display().to_string(),
        location,
        message,
    })?;

    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for (index, (location, value)) in records.into_iter().enumerate() {
        let mapped = adapters::map_record(adapter, &value, index, &root).and_then(|task| match task {
            Some(t) => t.validate().map(|_| Some(t)).map_err(|e| e.to_string()),
            None => Ok(None),
        });
        match mapped {
            Ok(Some(task)) => {
                if !seen.insert(task.id.clone()) {
                    return Err(DatasetError::DuplicateId(task.id));
                }
                report.tasks.push(task);
            }
            Ok(None) => report.filtered.push(RecordIssue {
                location,
                message: adapter.filter_reason().to_string(),
            }),
            Err(message) => match options.mode {
                LoadMode::Strict => {
                    return Err(DatasetError::Schema {
                        path: path.display().to_string(),
                        location,
                        message,
                    })
                }
                LoadMode::Lenient => {
                    log::warn!("{}: {location}: skipped: {message}", path.display());
                    report.skipped.push(RecordIssue { location, message });
                }
            },
        }
    }
    Ok(report)
}

/// Writes tasks in the internal JSONL format.
pub fn write_jsonl(tasks: &[TaskInstance], path: &Path) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for task in tasks {
        let line = serde_json::to_string(task).expect("task serializes");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// SHA-256 of a dataset file's bytes.
pub fn file_digest(path: &Path) -> Result<String, DatasetError> {
    fs::read(path).map(sha256_hex).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Task counts per `category` metadata value.
pub fn counts_by(tasks: &[TaskInstance], field: &str) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for t in tasks {
        if let Some(v) = t.metadata.get(field) {
            *out.entry(v.clone()).or_default() += 1;
        }
    }
    out
}
