//! Model backends behind one blocking `complete` contract.
//!
//! - [`HttpBackend`]: OpenAI-style chat-completions over HTTP(S).
//! - [`ScriptedBackend`]: replays a fixed list of replies in call order.
//! - [`RuleBackend`]: replies chosen by substring rules, independent of call order.
//! - [`CachedBackend`]: wraps any backend with an on-disk response cache.
//!
//! Token usage is tracked per [`Completion`] and accumulated in a [`UsageLedger`].

mod cache;
mod http;
mod scripted;
mod usage;

use serde::{Deserialize, Serialize};

use crate::digest::{sha256_hex, FieldHasher};

pub use cache::{CachedBackend, ResponseCache};
pub use http::{HttpBackend, HttpConfig};
pub use scripted::{ReplyRule, RuleBackend, ScriptedBackend};
pub use usage::{SharedLedger, UsageLedger};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("provider rejected request with status {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("script exhausted: request #{requested} but only {available} scripted repl(ies)")]
    ScriptExhausted { requested: usize, available: usize },
    #[error("no reply rule matches the request")]
    NoMatchingRule,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache I/O: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageAttachment {
    pub media_type: String,
    pub data: Vec<u8>,
}

impl ImageAttachment {
    pub fn digest(&self) -> String {
        sha256_hex(&self.data)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    /// Only user messages may carry images.
    pub images: Vec<ImageAttachment>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            text: text.into(),
            images: Vec::new(),
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            text: text.into(),
            images: Vec::new(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            text: text.into(),
            images: Vec::new(),
        }
    }

    pub fn with_images(mut self, images: Vec<ImageAttachment>) -> Self {
        self.images = images;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Provider sampling seed. Distinguishes otherwise identical samples so
    /// they get distinct cache entries.
    pub seed: Option<u64>,
}

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 2048;

impl CompletionRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<ChatMessage>, temperature: f64) -> Self {
        Self {
            model_id: model_id.into(),
            messages,
            temperature,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        if !self.temperature.is_finite() || !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        if let Some(m) = self.messages.iter().find(|m| m.role != Role::User && !m.images.is_empty()) {
            return Err(BackendError::InvalidRequest(format!(
                "images attached to a {} message",
                m.role.as_str()
            )));
        }
        Ok(())
    }

    /// Concatenated message texts, used for approximate prompt token counts.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Approximate prompt size in tokens (text only).
    pub fn approx_prompt_tokens(&self) -> u64 {
        self.messages.iter().map(|m| approx_token_count(&m.text)).sum()
    }
}

/// Where a completion's token counts came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TokenSource {
    /// Usage object reported by the provider.
    Provider,
    /// `approx_token_count` estimate.
    #[default]
    Approx,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub from_cache: bool,
    #[serde(default)]
    pub token_source: TokenSource,
}

impl Completion {
    /// Completion whose token counts are approximated from the request and reply text.
    pub fn approximate(request: &CompletionRequest, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            prompt_tokens: request.approx_prompt_tokens(),
            completion_tokens: approx_token_count(&text),
            text,
            from_cache: false,
            token_source: TokenSource::Approx,
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// A chat model. Implementations must be shareable across worker threads.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError>;

    /// Whether this backend reaches the network.
    fn is_remote(&self) -> bool {
        false
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }
    fn is_remote(&self) -> bool {
        (**self).is_remote()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }
    fn is_remote(&self) -> bool {
        (**self).is_remote()
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }
    fn is_remote(&self) -> bool {
        (**self).is_remote()
    }
}

/// Deterministic tokenizer stand-in: one token per four characters, rounded up.
pub fn approx_token_count(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Stable SHA-256 key over every request field. Images contribute their
/// media type and payload digest.
pub fn cache_key(request: &CompletionRequest) -> String {
    let mut h = FieldHasher::new();
    h.field(&request.model_id)
        .field(request.temperature.to_bits().to_le_bytes())
        .field(request.max_output_tokens.to_le_bytes());
    match request.seed {
        Some(seed) => h.field([1u8]).field(seed.to_le_bytes()),
        None => h.field([0u8]),
    };
    h.field((request.messages.len() as u64).to_le_bytes());
    for m in &request.messages {
        h.field(m.role.as_str()).field(&m.text);
        h.field((m.images.len() as u64).to_le_bytes());
        for img in &m.images {
            h.field(&img.media_type).field(img.digest());
        }
    }
    h.finish()
}
