use serde::{Deserialize, Serialize};

use super::{extract, FinalReply, StrategyError, StrategyOutcome};
use crate::backend::{
    Backend, ChatMessage, CompletionRequest, ImageAttachment, TokenSource, UsageLedger, DEFAULT_MAX_OUTPUT_TOKENS,
};
use crate::digest::FieldHasher;
use crate::task::TaskInstance;

/// Per-run request settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl RunSettings {
    pub fn new(model_id: impl Into<String>, temperature: f64) -> Self {
        Self {
            model_id: model_id.into(),
            temperature,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub label: String,
    /// SHA-256 over the request's (role, text) messages.
    pub prompt_digest: String,
    pub completion: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub from_cache: bool,
    #[serde(default)]
    pub token_source: TokenSource,
}

/// Mutable state of one strategy execution.
pub(crate) struct Session<'a, B: Backend + ?Sized> {
    pub task: &'a TaskInstance,
    backend: &'a B,
    settings: &'a RunSettings,
    images: Vec<ImageAttachment>,
    trace: Vec<TraceStep>,
    usage: UsageLedger,
}

/// Optional knobs of a single call.
#[derive(Default, Clone, Copy)]
pub(crate) struct CallOptions<'s> {
    pub system: Option<&'s str>,
    pub temperature: Option<f64>,
    pub seed: Option<u64>,
}

fn load_images(task: &TaskInstance) -> Result<Vec<ImageAttachment>, StrategyError> {
    task.images
        .iter()
        .map(|img| {
            let data = std::fs::read(&img.path).map_err(|source| StrategyError::Image {
                path: img.path.display().to_string(),
                source,
            })?;
            Ok(ImageAttachment {
                media_type: img.resolved_media_type(),
                data,
            })
        })
        .collect()
}

impl<'a, B: Backend + ?Sized> Session<'a, B> {
    pub fn new(task: &'a TaskInstance, backend: &'a B, settings: &'a RunSettings) -> Result<Self, StrategyError> {
        Ok(Self {
            task,
            backend,
            settings,
            images: load_images(task)?,
            trace: Vec::new(),
            usage: UsageLedger::default(),
        })
    }

    pub fn temperature(&self) -> f64 {
        self.settings.temperature
    }

    /// One backend call. Task images ride on the user message.
    pub fn call(&mut self, label: impl Into<String>, user_text: String, opts: CallOptions<'_>) -> Result<String, StrategyError> {
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = opts.system {
            messages.push(ChatMessage::system(system));
        }
        messages.push(ChatMessage::user(user_text).with_images(self.images.clone()));

        let mut digest = FieldHasher::new();
        for m in &messages {
            digest.field(m.role.as_str()).field(&m.text);
        }

        let mut request = CompletionRequest::new(
            self.settings.model_id.clone(),
            messages,
            opts.temperature.unwrap_or(self.settings.temperature),
        );
        request.max_output_tokens = self.settings.max_output_tokens;
        request.seed = opts.seed;

        let completion = self.backend.complete(&request)?;
        self.usage.record(&completion);
        self.trace.push(TraceStep {
            label: label.into(),
            prompt_digest: digest.finish(),
            completion: completion.text.clone(),
            prompt_tokens: completion.prompt_tokens,
            completion_tokens: completion.completion_tokens,
            from_cache: completion.from_cache,
            token_source: completion.token_source,
        });
        Ok(completion.text)
    }

    pub fn finish(self, reply: FinalReply, rounds_used: u32) -> StrategyOutcome {
        let final_answer = match reply {
            FinalReply::Raw(text) => extract(self.task, &text),
            FinalReply::Extracted(answer) => answer,
        };
        StrategyOutcome {
            extraction_failed: final_answer.is_empty(),
            final_answer,
            calls: self.trace.len() as u32,
            usage: self.usage,
            trace: self.trace,
            rounds_used,
        }
    }
}
