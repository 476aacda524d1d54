//! Experiment orchestration: config, bounded-concurrency runs, persisted
//! reports and traces, the results table and pareto data.

mod config;
mod goldens;
mod report;
mod run;

use std::path::{Path, PathBuf};

pub use config::{
    model_temperature, BackendConfig, DatasetConfig, ExperimentConfig, Seeds, SplitPart, DEFAULT_API_KEY_ENV,
};
pub use goldens::{golden_path, validate_goldens, GoldenCheck, DEFAULT_GOLDEN_DIR, GOLDEN_VARIANTS};
pub use report::{cmd_report, compute_pareto, load_reports, render_table, ParetoPoint, ReportFiles};
pub use run::{cmd_run, derive_seed, run_experiment, DatasetInfo, Manifest, RunOptions, RunSummary, TaskTrace};

use crate::backend::BackendError;
use crate::datasets::DatasetError;
use crate::eval::EvalError;
use crate::prompt::PromptError;
use crate::strategies::StrategyError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset file not found: {}", .0.display())]
    MissingDataset(PathBuf),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no metric reports in {}", .0.display())]
    EmptyRunDir(PathBuf),
    #[error("{}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<BackendError> for HarnessError {
    fn from(e: BackendError) -> Self {
        HarnessError::BackendUnavailable(e.to_string())
    }
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
