use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SplitPart};
use super::{write_json, HarnessError};
use crate::backend::{Backend, SharedLedger, TokenSource, UsageLedger};
use crate::datasets::{
    category_counts, file_digest, load_with, sample_qa, select_math_subset, split_tasks, Adapter, LoadOptions,
    RecordIssue, SplitSpec,
};
use crate::digest::sha256_hex;
use crate::eval::{CodeRunResult, MetricName, MetricReport, RepeatStats, Sandbox, Scorer, TaskScore};
use crate::strategies::{run_strategy, RunSettings, StrategyKind, StrategyOutcome, TraceStep};
use crate::task::TaskInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Independent repetitions with derived seeds; reports carry mean and spread.
    pub repeats: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { repeats: 1 }
    }
}

/// Dataset provenance recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub adapter: String,
    pub path: String,
    pub sha256: String,
    pub loaded: usize,
    pub skipped: Vec<RecordIssue>,
    pub filtered: usize,
    /// Tasks after MATH subset selection and sampling.
    pub pool: usize,
    pub split: SplitPart,
    pub evaluated: usize,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub category_counts: std::collections::BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_file: String,
    pub config_sha256: String,
    pub model_id: String,
    pub temperature: f64,
    pub sample_seed: u64,
    pub split_seed: u64,
    pub repeats: u32,
    pub concurrency_limit: usize,
    pub live_mode: bool,
    pub datasets: Vec<DatasetInfo>,
    /// Report files relative to the run directory, in config order.
    pub reports: Vec<String>,
    /// Billed usage of this invocation; cache hits are not billed.
    pub usage: UsageLedger,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_secs: f64,
    pub version: String,
}

/// Everything persisted for one (task, strategy) execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTrace {
    pub task_id: String,
    pub dataset: String,
    pub strategy: StrategyKind,
    pub model_id: String,
    pub final_answer: String,
    pub extraction_failed: bool,
    pub score: f64,
    pub calls: u32,
    pub rounds_used: u32,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub steps: Vec<TraceStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_run: Option<CodeRunResult>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub reports: Vec<MetricReport>,
    pub manifest: Manifest,
}

/// Seed for repeat `r`; repeat 0 keeps the configured seed.
pub fn derive_seed(seed: u64, repeat: u32) -> u64 {
    seed ^ (repeat as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Reads, validates and runs a config file. Relative paths resolve against its directory.
pub fn cmd_run(config_path: &Path, options: &RunOptions) -> Result<RunSummary, HarnessError> {
    let text = fs::read_to_string(config_path).map_err(|e| HarnessError::io(config_path, e))?;
    let mut config = ExperimentConfig::from_toml(&text)?;
    config.resolve_paths(config_path.parent().unwrap_or(Path::new(".")));
    let backend = config.build_backend()?;
    run_experiment(&config, &text, backend.as_ref(), options)
}

struct Prepared {
    name: String,
    tasks: Vec<TaskInstance>,
    info: DatasetInfo,
}

fn prepare(config: &ExperimentConfig, index: usize, repeat: u32) -> Result<Prepared, HarnessError> {
    let dc = &config.datasets[index];
    if !dc.path.is_file() {
        return Err(HarnessError::MissingDataset(dc.path.clone()));
    }
    let adapter: Adapter = dc.adapter.parse()?;
    let report = load_with(
        &dc.path,
        adapter,
        &LoadOptions {
            mode: dc.mode,
            root: dc.root.clone(),
        },
    )?;
    let loaded = report.tasks.len();
    let mut pool = report.tasks;
    let sample_seed = derive_seed(config.seeds.sample, repeat);
    if dc.math_subset {
        pool = select_math_subset(&pool, sample_seed)?;
    }
    if let Some(n) = dc.sample {
        pool = sample_qa(&pool, n.min(pool.len()), sample_seed)?;
    }
    let split = SplitSpec::new(derive_seed(config.seeds.split, repeat));
    let mut tasks = match dc.split {
        SplitPart::All => pool.clone(),
        SplitPart::Validation => split_tasks(&pool, split).0,
        SplitPart::Test => split_tasks(&pool, split).1,
    };
    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    let info = DatasetInfo {
        name: dc.display_name(),
        adapter: adapter.as_str().to_string(),
        path: dc.path.display().to_string(),
        sha256: file_digest(&dc.path)?,
        loaded,
        skipped: report.skipped,
        filtered: report.filtered.len(),
        pool: pool.len(),
        split: dc.split,
        evaluated: tasks.len(),
        category_counts: if dc.math_subset { category_counts(&pool) } else { Default::default() },
    };
    Ok(Prepared {
        name: dc.display_name(),
        tasks,
        info,
    })
}

struct TaskResult {
    score: f64,
    outcome: StrategyOutcome,
    code_run: Option<CodeRunResult>,
}

/// Runs `work` over `items` on at most `limit` threads; results come back in
/// input order. The first error stops workers from taking new items.
fn run_pool<T: Sync, R: Send>(
    items: &[T],
    limit: usize,
    work: impl Fn(&T) -> Result<R, HarnessError> + Sync,
) -> Result<Vec<R>, HarnessError> {
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<R, HarnessError>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..limit.min(items.len()).max(1) {
            scope.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let result = work(item);
                if result.is_err() {
                    failed.store(true, Ordering::SeqCst);
                }
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    let slots = slots.into_inner().unwrap();
    let mut out = Vec::with_capacity(items.len());
    let mut first_err = None;
    for slot in slots {
        match slot {
            Some(Ok(r)) => out.push(r),
            Some(Err(e)) => {
                first_err.get_or_insert(e);
            }
            None => {}
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn token_unit(outcomes: &[&StrategyOutcome]) -> &'static str {
    let mut provider = false;
    let mut approx = false;
    for step in outcomes.iter().flat_map(|o| &o.trace) {
        match step.token_source {
            TokenSource::Provider => provider = true,
            TokenSource::Approx => approx = true,
        }
    }
    match (provider, approx) {
        (true, true) => "mixed",
        (true, false) => "provider",
        _ => "approx",
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

/// Runs every (dataset, strategy) pair of `config` through `backend`, caching
/// completions under `config.cache_dir`, and writes the run directory.
pub fn run_experiment(
    config: &ExperimentConfig,
    config_text: &str,
    backend: &dyn Backend,
    options: &RunOptions,
) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    if options.repeats == 0 {
        return Err(HarnessError::Config("repeats must be at least 1".into()));
    }
    if backend.is_remote() && !config.live_mode {
        return Err(HarnessError::Config("a remote backend requires live_mode = true".into()));
    }
    let started = chrono::Utc::now();
    let clock = Instant::now();

    let run_dir = config.output_dir.join(&config.name);
    for derived in ["reports", "traces"] {
        let p = run_dir.join(derived);
        if p.exists() {
            fs::remove_dir_all(&p).map_err(|e| HarnessError::io(&p, e))?;
        }
    }
    fs::create_dir_all(run_dir.join("reports")).map_err(|e| HarnessError::io(&run_dir, e))?;
    fs::write(run_dir.join("config.toml"), config_text).map_err(|e| HarnessError::io(&run_dir, e))?;

    let settings = RunSettings {
        max_output_tokens: config.max_output_tokens.unwrap_or(crate::backend::DEFAULT_MAX_OUTPUT_TOKENS),
        ..RunSettings::new(config.model_id.clone(), config.effective_temperature())
    };
    let mut sandbox = config.python.as_deref().map_or_else(Sandbox::default, Sandbox::new);
    sandbox = sandbox.with_process_cap(config.concurrency_limit);
    let scorer = Scorer {
        sandbox,
        time_limit_ms: config.code_time_limit_ms.unwrap_or(crate::eval::DEFAULT_TIME_LIMIT_MS),
    };
    let ledger = SharedLedger::new();

    // (dataset, strategy) -> aggregates per repeat
    let cells = config.datasets.len() * config.strategies.len();
    let mut aggregates: Vec<Vec<f64>> = vec![Vec::new(); cells];
    let mut reports: Vec<Option<MetricReport>> = vec![None; cells];
    let mut infos = Vec::new();

    for repeat in 0..options.repeats {
        let cached = config.cached(backend, repeat);
        for di in 0..config.datasets.len() {
            let prepared = prepare(config, di, repeat)?;
            if repeat == 0 {
                infos.push(prepared.info.clone());
            }
            for (si, kind) in config.strategies.iter().enumerate() {
                let results = run_pool(&prepared.tasks, config.concurrency_limit, |task| {
                    let outcome = run_strategy(kind, task, &cached, &settings)?;
                    ledger.absorb(&outcome.usage);
                    let scored = scorer.score(task, &outcome.final_answer)?;
                    Ok(TaskResult {
                        score: scored.score,
                        outcome,
                        code_run: scored.code_run,
                    })
                })?;
                let cell = di * config.strategies.len() + si;
                let report = build_report(&prepared, kind, &config.model_id, &results);
                aggregates[cell].push(report.aggregate);
                if repeat == 0 {
                    write_traces(&run_dir, &prepared, kind, &config.model_id, &results)?;
                    reports[cell] = Some(report);
                }
            }
        }
    }

    let mut file_names = Vec::with_capacity(cells);
    let mut out = Vec::with_capacity(cells);
    for (cell, report) in reports.into_iter().enumerate() {
        let mut report = report.expect("every cell ran in repeat 0");
        if options.repeats > 1 {
            report.repeats = Some(RepeatStats::from_aggregates(std::mem::take(&mut aggregates[cell])));
        }
        let name = format!("reports/{}_{}.json", sanitize(&report.dataset), report.strategy.slug());
        write_json(&run_dir.join(&name), &report)?;
        file_names.push(name);
        out.push(report);
    }

    let finished = chrono::Utc::now();
    let manifest = Manifest {
        name: config.name.clone(),
        config_file: "config.toml".into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        model_id: config.model_id.clone(),
        temperature: config.effective_temperature(),
        sample_seed: config.seeds.sample,
        split_seed: config.seeds.split,
        repeats: options.repeats,
        concurrency_limit: config.concurrency_limit,
        live_mode: config.live_mode,
        datasets: infos,
        reports: file_names,
        usage: ledger.snapshot(),
        started_at: started.to_rfc3339(),
        finished_at: finished.to_rfc3339(),
        wall_time_secs: clock.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&run_dir.join("manifest.json"), &manifest)?;
    Ok(RunSummary {
        run_dir,
        reports: out,
        manifest,
    })
}

fn build_report(prepared: &Prepared, kind: &StrategyKind, model_id: &str, results: &[TaskResult]) -> MetricReport {
    let metric = prepared
        .tasks
        .first()
        .map_or(MetricName::TokenF1, |t| Scorer::metric_for(t.kind, t));
    let per_task = prepared
        .tasks
        .iter()
        .zip(results)
        .map(|(t, r)| TaskScore {
            task_id: t.id.clone(),
            score: r.score,
        })
        .collect();
    let (prompt, completion) = results.iter().fold((0, 0), |(p, c), r| {
        let (rp, rc) = r.outcome.token_cost();
        (p + rp, c + rc)
    });
    let outcomes: Vec<_> = results.iter().map(|r| &r.outcome).collect();
    let mut report = MetricReport::new(
        prepared.name.clone(),
        kind.clone(),
        model_id,
        metric,
        per_task,
        prompt,
        completion,
        token_unit(&outcomes),
    );
    let failed = results.iter().filter(|r| r.outcome.extraction_failed).count();
    if failed > 0 {
        report.notes.push(format!("{failed} task(s) had no extractable answer and scored 0"));
    }
    if prepared.tasks.iter().any(|t| Scorer::metric_for(t.kind, t) != metric) {
        report.notes.push("dataset mixes task kinds; metric taken from the first task".into());
    }
    report
}

fn write_traces(
    run_dir: &Path,
    prepared: &Prepared,
    kind: &StrategyKind,
    model_id: &str,
    results: &[TaskResult],
) -> Result<(), HarnessError> {
    let dir = run_dir.join("traces").join(sanitize(&prepared.name)).join(kind.slug());
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    for (task, r) in prepared.tasks.iter().zip(results) {
        let (prompt_tokens, completion_tokens) = r.outcome.token_cost();
        let trace = TaskTrace {
            task_id: task.id.clone(),
            dataset: prepared.name.clone(),
            strategy: kind.clone(),
            model_id: model_id.to_string(),
            final_answer: r.outcome.final_answer.clone(),
            extraction_failed: r.outcome.extraction_failed,
            score: r.score,
            calls: r.outcome.calls,
            rounds_used: r.outcome.rounds_used,
            prompt_tokens,
            completion_tokens,
            steps: r.outcome.trace.clone(),
            code_run: r.code_run.clone(),
        };
        write_json(&dir.join(format!("{}.json", sanitize(&task.id))), &trace)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_keeps_input_order() {
        let items: Vec<u64> = (0..50).collect();
        for limit in [1, 3, 16] {
            let out = run_pool(&items, limit, |x| {
                std::thread::sleep(std::time::Duration::from_micros((50 - x) * 20));
                Ok(x * 2)
            })
            .unwrap();
            assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        }
    }

    #[test]
    fn pool_reports_error() {
        let items: Vec<u64> = (0..10).collect();
        let r = run_pool(&items, 2, |x| {
            if *x == 4 {
                Err(HarnessError::Config("boom".into()))
            } else {
                Ok(*x)
            }
        });
        assert!(r.is_err());
    }

    #[test]
    fn seeds_and_ids() {
        assert_eq!(derive_seed(7, 0), 7);
        assert_ne!(derive_seed(7, 1), derive_seed(7, 2));
        assert_eq!(sanitize("HumanEval/12"), "HumanEval_12");
    }
}
