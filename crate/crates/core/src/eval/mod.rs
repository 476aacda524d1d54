//! Answer extraction and scoring.
//!
//! | kind      | metric                                              |
//! |-----------|-----------------------------------------------------|
//! | QA        | token F1 against the gold answers                   |
//! | Code      | pass@1 via [`Sandbox::run_code_tests`]              |
//! | Math      | solve rate via [`math_equiv`]                       |
//! | Image QA  | choice accuracy, or token F1 for free-form answers  |

mod choice;
mod extract;
mod math;
mod report;
mod sandbox;
mod text;

pub use choice::{choice_accuracy, parse_choice, resolve_choice};
pub use extract::extract_final_answer;
pub(crate) use extract::last_boxed;
pub use math::{canonical_math, math_equiv, parse_rational, MathCanon};
pub use report::{MetricName, MetricReport, RepeatStats, TaskScore};
pub use sandbox::{pass_at_1, CodeRunResult, Sandbox, TestOutcome, DEFAULT_TIME_LIMIT_MS, PASS_SENTINEL};
pub use text::{normalize_answer, token_f1};

use crate::task::{Gold, TaskInstance, TaskKind};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("gold answer list is empty")]
    EmptyGolds,
    #[error("candidate source is empty")]
    EmptyCandidate,
    #[error("time limit must be at least 1 ms")]
    InvalidTimeLimit,
    #[error("interpreter {0:?} not found")]
    InterpreterMissing(String),
    #[error("scratch directory I/O: {0}")]
    Scratch(#[from] std::io::Error),
    #[error("task {task} cannot be scored: {reason}")]
    Unscorable { task: String, reason: String },
}

/// Scoring dependencies shared across tasks.
#[derive(Debug, Clone)]
pub struct Scorer {
    pub sandbox: Sandbox,
    pub time_limit_ms: u64,
}

impl Default for Scorer {
    fn default() -> Self {
        Self {
            sandbox: Sandbox::default(),
            time_limit_ms: DEFAULT_TIME_LIMIT_MS,
        }
    }
}

/// Per-task score plus the code-run record for code tasks.
#[derive(Debug, Clone)]
pub struct Scored {
    pub score: f64,
    pub code_run: Option<CodeRunResult>,
}

impl Scorer {
    pub fn metric_for(kind: TaskKind, task: &TaskInstance) -> MetricName {
        match (kind, &task.gold) {
            (TaskKind::Qa, _) => MetricName::TokenF1,
            (TaskKind::Code, _) => MetricName::PassAt1,
            (TaskKind::Math, _) => MetricName::SolveRate,
            (TaskKind::ImageQa, Gold::Choice { .. }) => MetricName::Accuracy,
            (TaskKind::ImageQa, _) => MetricName::TokenF1,
        }
    }

    /// Scores an already extracted answer. An empty answer scores 0 without
    /// running anything.
    pub fn score(&self, task: &TaskInstance, answer: &str) -> Result<Scored, EvalError> {
        let plain = |score: f64| Ok(Scored { score, code_run: None });
        match &task.gold {
            Gold::Answers { answers } => match task.kind {
                TaskKind::Math => {
                    let gold = answers.first().ok_or(EvalError::EmptyGolds)?;
                    plain(if !answer.is_empty() && math_equiv(answer, gold) { 1.0 } else { 0.0 })
                }
                _ => plain(token_f1(answer, answers)?),
            },
            Gold::Choice { answer: gold, choices } => plain(choice_accuracy(answer, gold, choices) as f64),
            Gold::Tests { suite } => {
                if answer.trim().is_empty() {
                    return plain(0.0);
                }
                let run = self.sandbox.run_code_tests(answer, suite, self.time_limit_ms)?;
                Ok(Scored {
                    score: if run.passed() { 1.0 } else { 0.0 },
                    code_run: Some(run),
                })
            }
        }
    }
}
