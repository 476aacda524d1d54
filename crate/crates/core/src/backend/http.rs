//! OpenAI-style chat-completions client.

use std::time::Duration;

use base64::Engine as _;
use rand::Rng;
use serde_json::{json, Value};

use super::{approx_token_count, Backend, BackendError, ChatMessage, Completion, CompletionRequest, TokenSource};

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL up to and excluding `/chat/completions`, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub max_attempts: u32,
    pub base_backoff: Duration,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            max_attempts: 3,
            base_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads the API key from `var`; a missing variable leaves the key unset.
    pub fn with_api_key_env(mut self, var: &str) -> Self {
        self.api_key = std::env::var(var).ok().filter(|k| !k.is_empty());
        self
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

enum Attempt {
    Retry(String),
    Fail(BackendError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Unavailable {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self { config, client })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.config.base_backoff;
        let exp = base.saturating_mul(1 << attempt.min(16));
        let jitter_ms = rand::thread_rng().gen_range(0..=base.as_millis().max(1) as u64);
        exp + Duration::from_millis(jitter_ms)
    }

    fn attempt(&self, body: &Value) -> Result<Value, Attempt> {
        let mut builder = self.client.post(self.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("status {status}: {text}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fail(BackendError::Provider {
                status: status.as_u16(),
                body: text,
            }));
        }
        serde_json::from_str(&text)
            .map_err(|e| Attempt::Fail(BackendError::MalformedResponse(format!("invalid JSON: {e}"))))
    }
}

fn message_json(message: &ChatMessage) -> Value {
    if message.images.is_empty() {
        return json!({"role": message.role.as_str(), "content": message.text});
    }
    let mut parts = vec![json!({"type": "text", "text": message.text})];
    for img in &message.images {
        let data = base64::engine::general_purpose::STANDARD.encode(&img.data);
        parts.push(json!({
            "type": "image_url",
            "image_url": {"url": format!("data:{};base64,{}", img.media_type, data)},
        }));
    }
    json!({"role": message.role.as_str(), "content": parts})
}

/// Request body in the chat-completions wire format.
pub(crate) fn request_body(request: &CompletionRequest) -> Value {
    let mut body = json!({
        "model": request.model_id,
        "messages": request.messages.iter().map(message_json).collect::<Vec<_>>(),
        "temperature": request.temperature,
        "max_tokens": request.max_output_tokens,
        "stream": false,
    });
    if let Some(seed) = request.seed {
        body["seed"] = json!(seed);
    }
    body
}

/// Extracts text and usage; falls back to approximate counts when `usage` is absent.
pub(crate) fn parse_response(request: &CompletionRequest, body: &Value) -> Result<Completion, BackendError> {
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| BackendError::MalformedResponse("no choices[0].message".into()))?;
    if let Some(refusal) = message.get("refusal").and_then(Value::as_str) {
        return Err(BackendError::MalformedResponse(format!("refusal: {refusal}")));
    }
    let text = match message.get("content") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Array(parts)) => parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join(""),
        _ => String::new(),
    };
    if text.is_empty() {
        return Err(BackendError::MalformedResponse("empty content".into()));
    }
    let usage = body.get("usage");
    let count = |field: &str| usage.and_then(|u| u.get(field)).and_then(Value::as_u64);
    let (prompt_tokens, completion_tokens, token_source) =
        match (count("prompt_tokens"), count("completion_tokens")) {
            (Some(p), Some(c)) => (p, c, TokenSource::Provider),
            _ => (request.approx_prompt_tokens(), approx_token_count(&text), TokenSource::Approx),
        };
    Ok(Completion {
        text,
        prompt_tokens,
        completion_tokens,
        from_cache: false,
        token_source,
    })
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let body = request_body(request);
        let attempts = self.config.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff(attempt - 1));
            }
            match self.attempt(&body) {
                Ok(value) => return parse_response(request, &value),
                Err(Attempt::Fail(err)) => return Err(err),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("chat completion attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(BackendError::Unavailable {
            attempts,
            message: last,
        })
    }

    fn is_remote(&self) -> bool {
        true
    }
}
