use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, Completion, CompletionRequest};

/// Replays `script` in call order; token counts are approximated.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: Vec<String>,
    cursor: AtomicUsize,
    requests: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(script: impl IntoIterator<Item = S>) -> Self {
        Self {
            script: script.into_iter().map(Into::into).collect(),
            cursor: AtomicUsize::new(0),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// Number of `complete` calls made so far, including failed ones.
    pub fn calls(&self) -> usize {
        self.cursor.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let index = self.cursor.fetch_add(1, Ordering::SeqCst);
        self.requests.lock().unwrap().push(request.clone());
        let reply = self.script.get(index).ok_or(BackendError::ScriptExhausted {
            requested: index + 1,
            available: self.script.len(),
        })?;
        Ok(Completion::approximate(request, reply.clone()))
    }
}

/// One reply rule: if every message text joined contains `pattern`, answer `reply`.
/// An empty pattern matches everything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyRule {
    #[serde(rename = "match")]
    pub pattern: String,
    pub reply: String,
}

/// Order-independent scripted backend: the first matching rule wins.
#[derive(Debug, Clone, Default)]
pub struct RuleBackend {
    rules: Vec<ReplyRule>,
}

impl RuleBackend {
    pub fn new(rules: Vec<ReplyRule>) -> Self {
        Self { rules }
    }

    /// Reads rules from a JSONL file of `{"match": ..., "reply": ...}` objects.
    pub fn from_jsonl(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rules = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rule: ReplyRule = serde_json::from_str(line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), n + 1),
                )
            })?;
            rules.push(rule);
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[ReplyRule] {
        &self.rules
    }
}

impl Backend for RuleBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let text = request.prompt_text();
        let rule = self
            .rules
            .iter()
            .find(|r| text.contains(&r.pattern))
            .ok_or(BackendError::NoMatchingRule)?;
        Ok(Completion::approximate(request, rule.reply.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ChatMessage;

    fn req(text: &str) -> CompletionRequest {
        CompletionRequest::new("m", vec![ChatMessage::user(text)], 0.0)
    }

    #[test]
    fn replays_then_exhausts() {
        let b = ScriptedBackend::new(["42"]);
        let c = b.complete(&req("q")).unwrap();
        assert_eq!(c.text, "42");
        assert!(!c.from_cache);
        assert!(matches!(
            b.complete(&req("q")),
            Err(BackendError::ScriptExhausted {
                requested: 2,
                available: 1
            })
        ));
        assert_eq!(b.calls(), 2);
    }

    #[test]
    fn rules_pick_first_match() {
        let b = RuleBackend::new(vec![
            ReplyRule {
                pattern: "apples".into(),
                reply: "#### 5".into(),
            },
            ReplyRule {
                pattern: String::new(),
                reply: "fallback".into(),
            },
        ]);
        assert_eq!(b.complete(&req("how many apples")).unwrap().text, "#### 5");
        assert_eq!(b.complete(&req("pears")).unwrap().text, "fallback");
        assert!(matches!(
            RuleBackend::default().complete(&req("x")),
            Err(BackendError::NoMatchingRule)
        ));
    }
}
