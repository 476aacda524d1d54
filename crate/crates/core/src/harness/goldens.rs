use std::fs;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::datasets::{load_with, Adapter, LoadOptions};
use crate::digest::sha256_hex;
use crate::prompt::{render_inot_prompt, InotVariant, DEFAULT_MAX_ROUNDS};

/// Checked-in goldens of this crate.
pub const DEFAULT_GOLDEN_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/goldens");

pub const GOLDEN_VARIANTS: [InotVariant; 3] =
    [InotVariant::Full, InotVariant::NoImageAugment, InotVariant::NoPromptCodeDefinition];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenCheck {
    pub task_id: String,
    pub variant: InotVariant,
    pub path: PathBuf,
    pub expected_sha256: Option<String>,
    pub actual_sha256: String,
}

impl GoldenCheck {
    pub fn ok(&self) -> bool {
        self.expected_sha256.as_deref() == Some(self.actual_sha256.as_str())
    }
}

/// File holding the golden prompt of `task_stem` under `variant`.
pub fn golden_path(dir: &Path, task_stem: &str, variant: InotVariant) -> PathBuf {
    dir.join(format!("{task_stem}.{}.txt", variant.as_str()))
}

/// Re-renders every `*.task.jsonl` fixture in `dir` under the three variants
/// at the default round budget and compares against the stored prompts.
/// With `bless`, mismatching or missing goldens are rewritten.
pub fn validate_goldens(dir: &Path, bless: bool) -> Result<Vec<GoldenCheck>, HarnessError> {
    let mut fixtures: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".task.jsonl"))
        .collect();
    fixtures.sort();
    if fixtures.is_empty() {
        return Err(HarnessError::Config(format!("no *.task.jsonl fixtures in {}", dir.display())));
    }
    let mut checks = Vec::new();
    for fixture in fixtures {
        let stem = fixture
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_suffix(".task.jsonl"))
            .unwrap_or_default()
            .to_string();
        let tasks = load_with(&fixture, Adapter::Internal, &LoadOptions::default())?.tasks;
        let [task] = tasks.as_slice() else {
            return Err(HarnessError::Config(format!("{} must hold exactly one task", fixture.display())));
        };
        for variant in GOLDEN_VARIANTS {
            let rendered = render_inot_prompt(task, variant, DEFAULT_MAX_ROUNDS)?;
            let path = golden_path(dir, &stem, variant);
            let expected = fs::read(&path).ok().map(sha256_hex);
            let check = GoldenCheck {
                task_id: task.id.clone(),
                variant,
                path: path.clone(),
                expected_sha256: expected,
                actual_sha256: rendered.digest.clone(),
            };
            if bless && !check.ok() {
                fs::write(&path, &rendered.rendered).map_err(|e| HarnessError::io(&path, e))?;
            }
            checks.push(check);
        }
    }
    Ok(checks)
}
