//! Introspective single-call debate prompting, baseline reasoning strategies,
//! and a benchmark harness for comparing them on QA, code, math and image-QA tasks.

pub mod backend;
pub mod datasets;
pub mod digest;
pub mod eval;
pub mod harness;
pub mod prompt;
pub mod strategies;
pub mod task;

pub use backend::{Backend, BackendError, ChatMessage, Completion, CompletionRequest, UsageLedger};
pub use prompt::{render_inot_prompt, AssembledPrompt, InotVariant};
pub use strategies::{run_strategy, RunSettings, StrategyKind, StrategyOutcome};
pub use task::{Gold, TaskInstance, TaskKind};
