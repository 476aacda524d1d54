//! Python bindings. Tasks and strategies cross the boundary as JSON strings
//! in the same shape the internal dataset format and configs use.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use inot_core::backend::ScriptedBackend;
use inot_core::eval;
use inot_core::harness::{self, ParetoPoint};
use inot_core::prompt::{self, InotVariant, ViolationKind};
use inot_core::strategies::{self, StrategyKind};
use inot_core::task::{TaskInstance, TaskKind};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_task(task_json: &str) -> PyResult<TaskInstance> {
    let task: TaskInstance = serde_json::from_str(task_json).map_err(value_err)?;
    task.validate().map_err(value_err)?;
    Ok(task)
}

fn parse_kind(kind: &str) -> PyResult<TaskKind> {
    serde_json::from_value(serde_json::Value::String(kind.into())).map_err(|_| value_err(format!("unknown task kind {kind:?}")))
}

fn parse_strategy(strategy_json: &str) -> PyResult<StrategyKind> {
    serde_json::from_str(strategy_json).map_err(value_err)
}

#[pyclass(get_all, frozen)]
struct Prompt {
    rendered: String,
    digest: String,
    tags: Vec<String>,
    max_rounds: u32,
    includes_image_augment: bool,
}

#[pyfunction]
#[pyo3(signature = (task_json, variant = "full", max_rounds = 10))]
fn render_inot_prompt(task_json: &str, variant: &str, max_rounds: u32) -> PyResult<Prompt> {
    let task = parse_task(task_json)?;
    let variant: InotVariant = serde_json::from_value(serde_json::Value::String(variant.into()))
        .map_err(|_| value_err(format!("unknown variant {variant:?}")))?;
    let p = prompt::render_inot_prompt(&task, variant, max_rounds).map_err(value_err)?;
    Ok(Prompt {
        tags: p.tags().into_iter().map(str::to_string).collect(),
        rendered: p.rendered,
        digest: p.digest,
        max_rounds: p.max_rounds,
        includes_image_augment: p.includes_image_augment,
    })
}

/// (kind, tag, byte offset) per violation.
#[pyfunction]
fn validate_xml_balance(text: &str) -> Vec<(String, String, usize)> {
    prompt::validate_xml_balance(text)
        .into_iter()
        .map(|v| {
            let kind = match v.kind {
                ViolationKind::UnmatchedClose => "unmatched_close",
                ViolationKind::Unclosed => "unclosed",
            };
            (kind.to_string(), v.tag, v.offset)
        })
        .collect()
}

#[pyfunction]
fn normalize_answer(text: &str) -> String {
    eval::normalize_answer(text)
}

#[pyfunction]
fn token_f1(prediction: &str, golds: Vec<String>) -> PyResult<f64> {
    eval::token_f1(prediction, &golds).map_err(value_err)
}

#[pyfunction]
fn math_equiv(a: &str, b: &str) -> bool {
    eval::math_equiv(a, b)
}

#[pyfunction]
fn extract_final_answer(kind: &str, completion_text: &str) -> PyResult<String> {
    Ok(eval::extract_final_answer(parse_kind(kind)?, completion_text))
}

#[pyfunction]
fn approx_token_count(text: &str) -> u64 {
    inot_core::backend::approx_token_count(text)
}

#[pyfunction]
fn expected_call_count(strategy_json: &str, rounds_used: u32) -> PyResult<u32> {
    Ok(strategies::expected_call_count(&parse_strategy(strategy_json)?, rounds_used))
}

#[pyfunction]
fn debate_converged(result_a: &str, result_b: &str) -> bool {
    strategies::debate_converged(result_a, result_b)
}

/// Frontier of (strategy, model_id, mean_total_tokens, score) points, tokens ascending.
#[pyfunction]
fn compute_pareto(points: Vec<(String, String, f64, f64)>) -> Vec<(String, String, f64, f64)> {
    let points: Vec<ParetoPoint> = points
        .into_iter()
        .map(|(strategy, model_id, tokens, score)| ParetoPoint {
            dataset: String::new(),
            strategy,
            model_id,
            mean_total_tokens_per_task: tokens,
            score,
            token_unit: String::new(),
        })
        .collect();
    harness::compute_pareto(&points)
        .into_iter()
        .map(|p| (p.strategy, p.model_id, p.mean_total_tokens_per_task, p.score))
        .collect()
}

#[pyclass(get_all, frozen)]
struct Outcome {
    final_answer: String,
    calls: u32,
    rounds_used: u32,
    prompt_tokens: u64,
    completion_tokens: u64,
    extraction_failed: bool,
    /// JSON list of trace steps.
    trace_json: String,
}

/// Runs a strategy against a backend that replays `replies` in order.
#[pyfunction]
#[pyo3(signature = (strategy_json, task_json, replies, model_id = "scripted", temperature = 0.0))]
fn run_strategy(
    strategy_json: &str,
    task_json: &str,
    replies: Vec<String>,
    model_id: &str,
    temperature: f64,
) -> PyResult<Outcome> {
    let kind = parse_strategy(strategy_json)?;
    let task = parse_task(task_json)?;
    let backend = ScriptedBackend::new(replies);
    let settings = strategies::RunSettings::new(model_id, temperature);
    let out = strategies::run_strategy(&kind, &task, &backend, &settings).map_err(runtime_err)?;
    let (prompt_tokens, completion_tokens) = out.token_cost();
    Ok(Outcome {
        trace_json: serde_json::to_string(&out.trace).map_err(runtime_err)?,
        final_answer: out.final_answer,
        calls: out.calls,
        rounds_used: out.rounds_used,
        prompt_tokens,
        completion_tokens,
        extraction_failed: out.extraction_failed,
    })
}

/// Seeded permutation behind dataset splitting and sampling.
#[pyfunction]
fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    inot_core::datasets::shuffled_indices(n, seed)
}

/// Runs an experiment config; returns the run directory.
#[pyfunction]
#[pyo3(signature = (config_path, repeats = 1))]
fn run_experiment(config_path: PathBuf, repeats: u32) -> PyResult<String> {
    let summary = harness::cmd_run(&config_path, &harness::RunOptions { repeats }).map_err(runtime_err)?;
    Ok(summary.run_dir.display().to_string())
}

/// Writes report.md and pareto.csv; returns their paths.
#[pyfunction]
fn write_report(run_dir: PathBuf) -> PyResult<(String, String)> {
    let files = harness::cmd_report(&run_dir).map_err(runtime_err)?;
    Ok((files.markdown.display().to_string(), files.pareto_csv.display().to_string()))
}

#[pymodule]
fn inot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Prompt>()?;
    m.add_class::<Outcome>()?;
    m.add_function(wrap_pyfunction!(render_inot_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(validate_xml_balance, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_answer, m)?)?;
    m.add_function(wrap_pyfunction!(token_f1, m)?)?;
    m.add_function(wrap_pyfunction!(math_equiv, m)?)?;
    m.add_function(wrap_pyfunction!(extract_final_answer, m)?)?;
    m.add_function(wrap_pyfunction!(approx_token_count, m)?)?;
    m.add_function(wrap_pyfunction!(expected_call_count, m)?)?;
    m.add_function(wrap_pyfunction!(debate_converged, m)?)?;
    m.add_function(wrap_pyfunction!(compute_pareto, m)?)?;
    m.add_function(wrap_pyfunction!(run_strategy, m)?)?;
    m.add_function(wrap_pyfunction!(shuffled_indices, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(write_report, m)?)?;
    m.add("DEFAULT_MAX_ROUNDS", prompt::DEFAULT_MAX_ROUNDS)?;
    Ok(())
}
