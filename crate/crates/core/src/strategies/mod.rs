//! Reasoning strategies behind a single contract: a task and a backend in,
//! a final answer, call count, usage and step trace out.
//!
//! [`StrategyKind::Inot`] sends one request carrying the whole debate protocol
//! as text. [`StrategyKind::ExternalDebate`] runs the same protocol with every
//! phase as a separate request, which makes it the token-cost counterfactual.

mod baselines;
mod debate;
mod session;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, UsageLedger};
use crate::eval::{extract_final_answer, normalize_answer};
use crate::prompt::{InotVariant, PromptError, DEFAULT_MAX_ROUNDS};
use crate::task::TaskInstance;

pub use debate::DebateScript;
pub use session::{RunSettings, TraceStep};

/// Temperature used for self-consistency samples when the run temperature is lower.
pub const SAMPLING_TEMPERATURE: f64 = 0.7;

#[derive(Debug, thiserror::Error)]
pub enum StrategyError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid strategy parameters: {0}")]
    InvalidParams(String),
    #[error("invalid task {id}: {reason}")]
    InvalidTask { id: String, reason: String },
    #[error("cannot read image {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    Io,
    Cot,
    Sccot { samples: u32 },
    #[serde(rename = "logicot")]
    LogiCot,
    Tot { breadth: u32, depth: u32 },
    Giot { iterations: u32 },
    Aiot { max_iterations: u32 },
    Inot {
        #[serde(default)]
        variant: InotVariant,
        #[serde(default = "default_rounds")]
        max_rounds: u32,
    },
    ExternalDebate {
        #[serde(default = "default_rounds")]
        max_rounds: u32,
    },
}

fn default_rounds() -> u32 {
    DEFAULT_MAX_ROUNDS
}

impl StrategyKind {
    pub fn inot() -> Self {
        StrategyKind::Inot {
            variant: InotVariant::Full,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let params: &[(&str, u32)] = match self {
            StrategyKind::Io | StrategyKind::Cot | StrategyKind::LogiCot => &[],
            StrategyKind::Sccot { samples } => &[("samples", *samples)],
            StrategyKind::Tot { breadth, depth } => &[("breadth", *breadth), ("depth", *depth)],
            StrategyKind::Giot { iterations } => &[("iterations", *iterations)],
            StrategyKind::Aiot { max_iterations } => &[("max_iterations", *max_iterations)],
            StrategyKind::Inot { max_rounds, .. } | StrategyKind::ExternalDebate { max_rounds } => {
                &[("max_rounds", *max_rounds)]
            }
        };
        match params.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(StrategyError::InvalidParams(format!("{name} must be at least 1"))),
            None => Ok(()),
        }
    }

    /// Display name used in report tables.
    pub fn label(&self) -> String {
        match self {
            StrategyKind::Io => "IO".into(),
            StrategyKind::Cot => "CoT".into(),
            StrategyKind::Sccot { .. } => "SCCOT".into(),
            StrategyKind::LogiCot => "LogiCoT".into(),
            StrategyKind::Tot { .. } => "ToT".into(),
            StrategyKind::Giot { .. } => "GIoT".into(),
            StrategyKind::Aiot { .. } => "AIoT".into(),
            StrategyKind::Inot { variant, .. } => match variant {
                InotVariant::Full => "INoT".into(),
                InotVariant::NoImageAugment => "INoT (w/o IAM)".into(),
                InotVariant::NoPromptCodeDefinition => "INoT (w/o PromptCode)".into(),
            },
            StrategyKind::ExternalDebate { .. } => "ExternalDebate".into(),
        }
    }

    /// File-name-safe identifier that includes the parameters.
    pub fn slug(&self) -> String {
        match self {
            StrategyKind::Io => "io".into(),
            StrategyKind::Cot => "cot".into(),
            StrategyKind::Sccot { samples } => format!("sccot_k{samples}"),
            StrategyKind::LogiCot => "logicot".into(),
            StrategyKind::Tot { breadth, depth } => format!("tot_b{breadth}_d{depth}"),
            StrategyKind::Giot { iterations } => format!("giot_n{iterations}"),
            StrategyKind::Aiot { max_iterations } => format!("aiot_m{max_iterations}"),
            StrategyKind::Inot { variant, max_rounds } => match variant {
                InotVariant::Full => format!("inot_r{max_rounds}"),
                v => format!("inot_{}_r{max_rounds}", v.as_str()),
            },
            StrategyKind::ExternalDebate { max_rounds } => format!("external_debate_r{max_rounds}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub final_answer: String,
    pub calls: u32,
    /// Billed usage; cached completions only count as cache hits.
    pub usage: UsageLedger,
    pub trace: Vec<TraceStep>,
    /// Iterations, debate rounds, revisions or tree levels actually run.
    pub rounds_used: u32,
    /// No answer could be extracted; scored 0.
    pub extraction_failed: bool,
}

impl StrategyOutcome {
    /// Prompt and completion tokens of every call, cached or not.
    pub fn token_cost(&self) -> (u64, u64) {
        self.trace
            .iter()
            .fold((0, 0), |(p, c), s| (p + s.prompt_tokens, c + s.completion_tokens))
    }

    pub fn total_tokens(&self) -> u64 {
        let (p, c) = self.token_cost();
        p + c
    }
}

/// Runs `kind` on `task`. Backend errors propagate; an empty extraction is
/// reported in the outcome rather than as an error.
pub fn run_strategy<B: Backend + ?Sized>(
    kind: &StrategyKind,
    task: &TaskInstance,
    backend: &B,
    settings: &RunSettings,
) -> Result<StrategyOutcome, StrategyError> {
    kind.validate()?;
    if task.statement.trim().is_empty() {
        return Err(StrategyError::InvalidTask {
            id: task.id.clone(),
            reason: "empty statement".into(),
        });
    }
    let mut session = session::Session::new(task, backend, settings)?;
    let (reply, rounds_used) = match *kind {
        StrategyKind::Io => (baselines::io(&mut session)?, 0),
        StrategyKind::Cot => (baselines::cot(&mut session)?, 0),
        StrategyKind::Sccot { samples } => (baselines::sccot(&mut session, samples)?, samples),
        StrategyKind::LogiCot => baselines::logicot(&mut session)?,
        StrategyKind::Tot { breadth, depth } => (baselines::tot(&mut session, breadth, depth)?, depth),
        StrategyKind::Giot { iterations } => baselines::iot(&mut session, iterations, false)?,
        StrategyKind::Aiot { max_iterations } => baselines::iot(&mut session, max_iterations, true)?,
        StrategyKind::Inot { variant, max_rounds } => (baselines::inot(&mut session, variant, max_rounds)?, 0),
        StrategyKind::ExternalDebate { max_rounds } => debate::external_debate(&mut session, max_rounds)?,
    };
    Ok(session.finish(reply, rounds_used))
}

/// The reply of the last call before extraction, or an already extracted answer.
pub(crate) enum FinalReply {
    Raw(String),
    Extracted(String),
}

/// Closed-form backend call count of a strategy that ran `rounds_used`
/// iterations (debate rounds, AIoT iterations, LogiCoT revisions).
pub fn expected_call_count(kind: &StrategyKind, rounds_used: u32) -> u32 {
    match *kind {
        StrategyKind::Io | StrategyKind::Cot | StrategyKind::Inot { .. } => 1,
        StrategyKind::Sccot { samples } => samples,
        StrategyKind::LogiCot => 2 + rounds_used.min(1),
        StrategyKind::Tot { breadth, depth } => 2 * breadth * depth + 1,
        StrategyKind::Giot { iterations } => 2 * iterations,
        StrategyKind::Aiot { .. } => 2 * rounds_used,
        StrategyKind::ExternalDebate { .. } => 2 + 8 * rounds_used,
    }
}

/// Agreement check between the two debaters' results.
pub fn debate_converged(result_a: &str, result_b: &str) -> bool {
    normalize_answer(result_a) == normalize_answer(result_b)
}

pub(crate) fn extract(task: &TaskInstance, reply: &str) -> String {
    extract_final_answer(task.kind, reply)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn call_count_examples() {
        assert_eq!(expected_call_count(&StrategyKind::inot(), 7), 1);
        assert_eq!(expected_call_count(&StrategyKind::ExternalDebate { max_rounds: 10 }, 3), 26);
        assert_eq!(expected_call_count(&StrategyKind::Giot { iterations: 5 }, 5), 10);
        assert_eq!(expected_call_count(&StrategyKind::Tot { breadth: 3, depth: 2 }, 2), 13);
        assert_eq!(expected_call_count(&StrategyKind::LogiCot, 0), 2);
        assert_eq!(expected_call_count(&StrategyKind::LogiCot, 1), 3);
    }

    #[test]
    fn convergence_examples() {
        assert!(debate_converged("42", "42"));
        assert!(!debate_converged("42", "43"));
        assert!(debate_converged("The Cat.", "the cat"));
    }

    #[test]
    fn zero_parameters_rejected() {
        assert!(StrategyKind::Sccot { samples: 0 }.validate().is_err());
        assert!(StrategyKind::Tot { breadth: 2, depth: 0 }.validate().is_err());
        assert!(StrategyKind::ExternalDebate { max_rounds: 0 }.validate().is_err());
        assert!(StrategyKind::inot().validate().is_ok());
    }

    #[test]
    fn kind_serde_shape() {
        let k: StrategyKind = serde_json::from_str(r#"{"kind":"sccot","samples":3}"#).unwrap();
        assert_eq!(k, StrategyKind::Sccot { samples: 3 });
        let k: StrategyKind = serde_json::from_str(r#"{"kind":"inot"}"#).unwrap();
        assert_eq!(k, StrategyKind::inot());
        let k: StrategyKind =
            serde_json::from_str(r#"{"kind":"inot","variant":"no_image_augment","max_rounds":4}"#).unwrap();
        assert_eq!(k.slug(), "inot_no_image_augment_r4");
    }
}
