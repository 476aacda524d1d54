mod common;

use std::sync::atomic::{AtomicUsize, Ordering};

use common::{count_files, fixture, harness_workspace, python_available, report_bytes};
use inot_core::backend::{Backend, BackendError, Completion, CompletionRequest, RuleBackend};
use inot_core::harness::{
    cmd_report, cmd_run, load_reports, run_experiment, ExperimentConfig, HarnessError, RunOptions,
};

fn load_config(path: &std::path::Path) -> (ExperimentConfig, String) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut c = ExperimentConfig::from_toml(&text).unwrap();
    c.resolve_paths(path.parent().unwrap());
    (c, text)
}

#[test]
fn fixture_run_layout_and_scores() {
    let (_dir, config) = harness_workspace();
    let summary = cmd_run(&config, &RunOptions::default()).unwrap();
    let run = &summary.run_dir;
    assert!(run.join("manifest.json").is_file());
    assert_eq!(std::fs::read_to_string(run.join("config.toml")).unwrap(), std::fs::read_to_string(&config).unwrap());
    assert_eq!(count_files(&run.join("reports")), 2);
    assert_eq!(count_files(&run.join("traces")), 20);

    let [io, inot] = summary.reports.as_slice() else { panic!("two reports") };
    assert_eq!((io.n, inot.n), (10, 10));
    assert!(inot.aggregate > io.aggregate);
    assert!((inot.aggregate - 1.0).abs() < 1e-12);
    assert!(io.per_task.windows(2).all(|w| w[0].task_id < w[1].task_id));
    assert_eq!(inot.token_unit, "approx");

    let m = &summary.manifest;
    assert_eq!(m.usage.total_calls, 20);
    assert_eq!(m.datasets[0].evaluated, 10);
    assert_eq!(m.datasets[0].sha256.len(), 64);
    assert_eq!(m.temperature, 0.0);
}

#[test]
fn rerun_is_byte_identical_and_unbilled() {
    let (_dir, config) = harness_workspace();
    let first = cmd_run(&config, &RunOptions::default()).unwrap();
    let bytes = report_bytes(&first.run_dir);
    let second = cmd_run(&config, &RunOptions::default()).unwrap();
    assert_eq!(report_bytes(&second.run_dir), bytes);
    assert_eq!(second.manifest.usage.total_calls, 0);
    assert_eq!(second.manifest.usage.cache_hits, 20);
}

#[test]
fn scores_independent_of_concurrency() {
    let (_a, config_a) = harness_workspace();
    let (_b, config_b) = harness_workspace();
    let text = std::fs::read_to_string(&config_b).unwrap().replace("concurrency_limit = 4", "concurrency_limit = 1");
    std::fs::write(&config_b, text).unwrap();
    let a = cmd_run(&config_a, &RunOptions::default()).unwrap();
    let b = cmd_run(&config_b, &RunOptions::default()).unwrap();
    assert_eq!(report_bytes(&a.run_dir), report_bytes(&b.run_dir));
}

/// Fails every call after the first `budget`.
struct Interrupting {
    inner: RuleBackend,
    budget: usize,
    used: AtomicUsize,
}

impl Backend for Interrupting {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        if self.used.fetch_add(1, Ordering::SeqCst) >= self.budget {
            return Err(BackendError::Unavailable {
                attempts: 1,
                message: "interrupted".into(),
            });
        }
        self.inner.complete(request)
    }
}

#[test]
fn interrupted_run_resumes_to_same_reports() {
    let (_fresh, fresh_config) = harness_workspace();
    let fresh = cmd_run(&fresh_config, &RunOptions::default()).unwrap();

    let (_dir, config_path) = harness_workspace();
    let (config, text) = load_config(&config_path);
    let rules = RuleBackend::from_jsonl(&config_path.with_file_name("rules.jsonl")).unwrap();
    let k = 7;
    let flaky = Interrupting {
        inner: rules,
        budget: k,
        used: AtomicUsize::new(0),
    };
    let err = run_experiment(&config, &text, &flaky, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::Strategy(_)), "{err}");

    let resumed = cmd_run(&config_path, &RunOptions::default()).unwrap();
    assert_eq!(report_bytes(&resumed.run_dir), report_bytes(&fresh.run_dir));
    assert_eq!(resumed.manifest.usage.total_calls, 20 - k as u64);
    assert_eq!(resumed.manifest.usage.cache_hits, k as u64);
}

#[test]
fn report_table_and_pareto() {
    let (_dir, config) = harness_workspace();
    let run = cmd_run(&config, &RunOptions::default()).unwrap().run_dir;
    let files = cmd_report(&run).unwrap();
    let md = std::fs::read_to_string(&files.markdown).unwrap();
    let table: Vec<&str> = md.lines().filter(|l| l.starts_with('|')).collect();
    assert_eq!(table.len(), 4);
    assert_eq!(table[0], "| Method | fixture_qa (F1 Score) | Avg. |");
    assert!(table[2].starts_with("| IO | "));
    assert_eq!(table[3], "| INoT | **100.0** | **100.0** |");

    let csv = std::fs::read_to_string(&files.pareto_csv).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 1 + 2);
    assert!(rows[0].starts_with("dataset,strategy,model_id,mean_total_tokens_per_task,score"));
    assert!(rows[2].starts_with("fixture_qa,INoT,scripted-gpt-4o,"));
    assert!(rows[2].ends_with(",true"));
}

#[test]
fn repeats_attach_spread() {
    let (_dir, config) = harness_workspace();
    let summary = cmd_run(&config, &RunOptions { repeats: 2 }).unwrap();
    for r in &summary.reports {
        let stats = r.repeats.as_ref().unwrap();
        assert_eq!(stats.runs, 2);
        assert_eq!(stats.spread, 0.0);
    }
    let md_files = cmd_report(&summary.run_dir).unwrap();
    assert!(std::fs::read_to_string(md_files.markdown).unwrap().contains("100.0 ± 0.0"));
}

#[test]
fn guards_fire_before_any_call() {
    let (_dir, config) = harness_workspace();
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("kind = \"rules\"\npath = \"rules.jsonl\"", "kind = \"http\"\nbase_url = \"http://127.0.0.1:9/v1\"");
    std::fs::write(&config, text).unwrap();
    let err = cmd_run(&config, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, HarnessError::Config(ref m) if m.contains("live_mode")), "{err}");
    assert!(!config.with_file_name("runs").exists());

    let (_dir, config) = harness_workspace();
    std::fs::remove_file(config.with_file_name("tasks.jsonl")).unwrap();
    assert!(matches!(cmd_run(&config, &RunOptions::default()), Err(HarnessError::MissingDataset(_))));

    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(cmd_report(empty.path()), Err(HarnessError::EmptyRunDir(_))));
    assert!(matches!(load_reports(empty.path()), Err(HarnessError::EmptyRunDir(_))));
}

#[test]
fn code_dataset_scored_in_sandbox() {
    if !python_available() {
        eprintln!("python3 not found; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("datasets/humaneval.jsonl"), dir.path().join("he.jsonl")).unwrap();
    let rules = [
        ("def add(a: int", "```python\ndef add(a: int, b: int) -> int:\n    return a + b\n```"),
        ("def is_even(n: int)", "```python\ndef is_even(n: int) -> bool:\n    return n % 2 == 1\n```"),
    ];
    let jsonl: String = rules
        .iter()
        .map(|(m, r)| serde_json::json!({"match": m, "reply": r}).to_string() + "\n")
        .collect();
    std::fs::write(dir.path().join("rules.jsonl"), jsonl).unwrap();
    let config = r#"
name = "code"
model_id = "scripted"
cache_dir = "cache"
output_dir = "runs"
code_time_limit_ms = 5000

[backend]
kind = "rules"
path = "rules.jsonl"

[[datasets]]
name = "HumanEval"
adapter = "humaneval"
path = "he.jsonl"
split = "all"

[[strategies]]
kind = "io"
"#;
    let path = dir.path().join("config.toml");
    std::fs::write(&path, config).unwrap();
    let summary = cmd_run(&path, &RunOptions::default()).unwrap();
    let r = &summary.reports[0];
    assert_eq!(r.metric.label(), "pass@1");
    let scores: Vec<f64> = r.per_task.iter().map(|t| t.score).collect();
    assert_eq!(scores, [1.0, 0.0]);
    let trace: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(summary.run_dir.join("traces/HumanEval/io/HumanEval_0.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(trace["code_run"]["sentinel_seen"], true);
}
