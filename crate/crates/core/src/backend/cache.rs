use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{cache_key, Backend, BackendError, Completion, CompletionRequest, TokenSource};

/// On-disk response store, one JSON file per key at `<dir>/<key[..2]>/<key>.json`.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    model_id: String,
    text: String,
    prompt_tokens: u64,
    completion_tokens: u64,
    #[serde(default)]
    token_source: TokenSource,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let prefix = key.get(..2).unwrap_or(key);
        self.dir.join(prefix).join(format!("{key}.json"))
    }

    /// Returns the stored completion flagged `from_cache`, or `None` on a miss.
    /// Unreadable entries count as misses.
    pub fn load(&self, key: &str) -> Option<Completion> {
        let bytes = fs::read(self.path_for(key)).ok()?;
        let entry: Entry = match serde_json::from_slice(&bytes) {
            Ok(e) => e,
            Err(err) => {
                log::warn!("ignoring corrupt cache entry {key}: {err}");
                return None;
            }
        };
        Some(Completion {
            text: entry.text,
            prompt_tokens: entry.prompt_tokens,
            completion_tokens: entry.completion_tokens,
            from_cache: true,
            token_source: entry.token_source,
        })
    }

    /// Writes atomically (temp file + rename) so readers never see partial entries.
    pub fn store(&self, key: &str, model_id: &str, completion: &Completion) -> std::io::Result<()> {
        let path = self.path_for(key);
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent)?;
        let entry = Entry {
            key: key.to_string(),
            model_id: model_id.to_string(),
            text: completion.text.clone(),
            prompt_tokens: completion.prompt_tokens,
            completion_tokens: completion.completion_tokens,
            token_source: completion.token_source,
        };
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(&serde_json::to_vec_pretty(&entry).map_err(std::io::Error::other)?)?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }
}

/// Serves repeated requests from a [`ResponseCache`]; misses go to the inner backend.
pub struct CachedBackend<B> {
    inner: B,
    cache: ResponseCache,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl<B: Backend> CachedBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            cache: ResponseCache::new(dir),
            key_locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn lock_for(&self, key: &str) -> Arc<Mutex<()>> {
        self.key_locks
            .lock()
            .unwrap()
            .entry(key.to_string())
            .or_default()
            .clone()
    }
}

impl<B: Backend> Backend for CachedBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let key = cache_key(request);
        if let Some(hit) = self.cache.load(&key) {
            return Ok(hit);
        }
        // concurrent requests for one key wait for the first to fill it
        let lock = self.lock_for(&key);
        let _guard = lock.lock().unwrap();
        if let Some(hit) = self.cache.load(&key) {
            return Ok(hit);
        }
        let fresh = self.inner.complete(request)?;
        self.cache.store(&key, &request.model_id, &fresh)?;
        Ok(Completion {
            from_cache: false,
            ..fresh
        })
    }

    fn is_remote(&self) -> bool {
        self.inner.is_remote()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ChatMessage, ScriptedBackend};

    fn req(text: &str) -> CompletionRequest {
        CompletionRequest::new("m", vec![ChatMessage::user(text)], 0.0)
    }

    #[test]
    fn second_identical_request_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let backend = CachedBackend::new(ScriptedBackend::new(["42"]), dir.path());
        let first = backend.complete(&req("q")).unwrap();
        let second = backend.complete(&req("q")).unwrap();
        assert!(!first.from_cache);
        assert!(second.from_cache);
        assert_eq!(first.text, second.text);
        assert_eq!(first.prompt_tokens, second.prompt_tokens);
        assert_eq!(first.completion_tokens, second.completion_tokens);
        assert_eq!(backend.inner().calls(), 1);
    }

    #[test]
    fn layout_uses_two_hex_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let backend = CachedBackend::new(ScriptedBackend::new(["x"]), dir.path());
        backend.complete(&req("q")).unwrap();
        let key = cache_key(&req("q"));
        let expected = dir.path().join(&key[..2]).join(format!("{key}.json"));
        assert!(expected.is_file());
    }

    #[test]
    fn store_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let c = Completion {
            text: "hello".into(),
            prompt_tokens: 17,
            completion_tokens: 3,
            from_cache: false,
            token_source: TokenSource::Provider,
        };
        cache.store("abcdef", "m", &c).unwrap();
        let back = cache.load("abcdef").unwrap();
        assert_eq!(back, Completion { from_cache: true, ..c });
        assert!(cache.load("ffffff").is_none());
    }

    #[test]
    fn concurrent_same_key_fills_once() {
        let dir = tempfile::tempdir().unwrap();
        let backend = CachedBackend::new(ScriptedBackend::new(["only"]), dir.path());
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| assert_eq!(backend.complete(&req("same")).unwrap().text, "only"));
            }
        });
        assert_eq!(backend.inner().calls(), 1);
    }
}
