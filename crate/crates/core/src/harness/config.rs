use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::backend::{Backend, CachedBackend, HttpBackend, HttpConfig, RuleBackend};
use crate::datasets::{Adapter, LoadMode};
use crate::strategies::StrategyKind;

/// Default API key variable for live runs.
pub const DEFAULT_API_KEY_ENV: &str = "INOT_API_KEY";

/// Which part of the 1:4 split a dataset is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPart {
    #[default]
    Test,
    Validation,
    /// Skip splitting; evaluate every selected task.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Report column name; defaults to the adapter name.
    #[serde(default)]
    pub name: Option<String>,
    pub adapter: String,
    pub path: PathBuf,
    /// Image root; defaults to the dataset file's directory.
    #[serde(default)]
    pub root: Option<PathBuf>,
    /// Uniform sample size drawn before splitting.
    #[serde(default)]
    pub sample: Option<usize>,
    /// Level 4-5 / three-category MATH subset before sampling.
    #[serde(default)]
    pub math_subset: bool,
    #[serde(default)]
    pub split: SplitPart,
    #[serde(default)]
    pub mode: LoadMode,
}

impl DatasetConfig {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.adapter.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub sample: u64,
    pub split: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { sample: 1, split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Order-independent scripted replies from a JSONL rules file.
    Rules { path: PathBuf },
    /// OpenAI-compatible chat-completions endpoint.
    Http {
        base_url: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_attempts")]
        max_attempts: u32,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_attempts() -> u32 {
    3
}

fn default_timeout() -> u64 {
    120
}

fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run directory name under `output_dir`.
    pub name: String,
    pub model_id: String,
    /// Overrides the per-model rule (1.0 for DeepSeek-V2.5, 0.0 otherwise).
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_concurrency")]
    pub concurrency_limit: usize,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub live_mode: bool,
    /// Python interpreter for code scoring.
    #[serde(default)]
    pub python: Option<String>,
    #[serde(default)]
    pub code_time_limit_ms: Option<u64>,
    pub backend: BackendConfig,
    pub datasets: Vec<DatasetConfig>,
    pub strategies: Vec<StrategyKind>,
}

/// Default sampling temperature for a model.
pub fn model_temperature(model_id: &str) -> f64 {
    let id = model_id.to_ascii_lowercase().replace(['_', ' '], "-");
    if id.contains("deepseek-v2.5") {
        1.0
    } else {
        0.0
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn effective_temperature(&self) -> f64 {
        self.temperature.unwrap_or_else(|| model_temperature(&self.model_id))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.concurrency_limit == 0 {
            return fail("concurrency_limit must be at least 1".into());
        }
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return fail(format!("invalid run name {:?}", self.name));
        }
        if self.datasets.is_empty() || self.strategies.is_empty() {
            return fail("at least one dataset and one strategy are required".into());
        }
        if matches!(self.backend, BackendConfig::Http { .. }) && !self.live_mode {
            return fail("an HTTP backend requires live_mode = true".into());
        }
        if let Some(t) = self.temperature {
            if !(0.0..=2.0).contains(&t) {
                return fail(format!("temperature {t} outside [0, 2]"));
            }
        }
        let mut names = std::collections::HashSet::new();
        for d in &self.datasets {
            d.adapter.parse::<Adapter>()?;
            if d.sample == Some(0) {
                return fail(format!("dataset {}: sample must be positive", d.display_name()));
            }
            if !names.insert(d.display_name()) {
                return fail(format!("duplicate dataset name {}", d.display_name()));
            }
        }
        let mut slugs = std::collections::HashSet::new();
        for s in &self.strategies {
            s.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
            if !slugs.insert(s.slug()) {
                return fail(format!("duplicate strategy {}", s.slug()));
            }
        }
        Ok(())
    }

    /// Relative paths in the config resolve against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.cache_dir);
        fix(&mut self.output_dir);
        if let BackendConfig::Rules { path } = &mut self.backend {
            fix(path);
        }
        for d in &mut self.datasets {
            fix(&mut d.path);
            if let Some(r) = &mut d.root {
                fix(r);
            }
        }
    }

    /// The uncached backend described by the config.
    pub fn build_backend(&self) -> Result<Box<dyn Backend>, HarnessError> {
        match &self.backend {
            BackendConfig::Rules { path } => {
                let rules = RuleBackend::from_jsonl(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                Ok(Box::new(rules))
            }
            BackendConfig::Http {
                base_url,
                api_key_env,
                max_attempts,
                timeout_secs,
            } => {
                if !self.live_mode {
                    return Err(HarnessError::Config("an HTTP backend requires live_mode = true".into()));
                }
                let var = api_key_env.as_deref().unwrap_or(DEFAULT_API_KEY_ENV);
                let mut config = HttpConfig::new(base_url.clone()).with_api_key_env(var);
                if api_key_env.is_some() && config.api_key.is_none() {
                    return Err(HarnessError::BackendUnavailable(format!("environment variable {var} is not set")));
                }
                config.max_attempts = *max_attempts;
                config.timeout = std::time::Duration::from_secs(*timeout_secs);
                Ok(Box::new(HttpBackend::new(config)?))
            }
        }
    }

    pub fn cached<B: Backend>(&self, inner: B, repeat: u32) -> CachedBackend<B> {
        let dir = if repeat == 0 {
            self.cache_dir.clone()
        } else {
            self.cache_dir.join(format!("repeat_{repeat}"))
        };
        CachedBackend::new(inner, dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
model_id = "gpt-4o"
cache_dir = "cache"
output_dir = "runs"

[backend]
kind = "rules"
path = "rules.jsonl"

[[datasets]]
adapter = "internal"
path = "tasks.jsonl"
split = "all"

[[strategies]]
kind = "io"

[[strategies]]
kind = "inot"
"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.concurrency_limit, 4);
        assert_eq!(c.effective_temperature(), 0.0);
        assert_eq!(c.strategies[1], StrategyKind::inot());
        assert_eq!(c.datasets[0].split, SplitPart::All);
    }

    #[test]
    fn temperature_rule() {
        assert_eq!(model_temperature("DeepSeek-V2.5"), 1.0);
        assert_eq!(model_temperature("deepseek_v2.5-chat"), 1.0);
        assert_eq!(model_temperature("qwen2.5-vl-72b"), 0.0);
    }

    #[test]
    fn guards() {
        let zero = BASE.replace("cache_dir", "concurrency_limit = 0\ncache_dir");
        assert!(matches!(ExperimentConfig::from_toml(&zero), Err(HarnessError::Config(_))));
        let http = BASE.replace("kind = \"rules\"\npath = \"rules.jsonl\"", "kind = \"http\"\nbase_url = \"http://127.0.0.1:9\"");
        let err = ExperimentConfig::from_toml(&http).unwrap_err();
        assert!(err.to_string().contains("live_mode"), "{err}");
        let dup = format!("{BASE}\n[[strategies]]\nkind = \"io\"\n");
        assert!(ExperimentConfig::from_toml(&dup).is_err());
    }
}
