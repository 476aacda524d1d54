use std::ops::{Add, AddAssign};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::Completion;

/// Billed usage. Cached completions only bump `cache_hits`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageLedger {
    pub total_prompt_tokens: u64,
    pub total_completion_tokens: u64,
    pub total_calls: u64,
    #[serde(default)]
    pub cache_hits: u64,
}

impl UsageLedger {
    pub fn record(&mut self, completion: &Completion) {
        if completion.from_cache {
            self.cache_hits += 1;
        } else {
            self.total_prompt_tokens += completion.prompt_tokens;
            self.total_completion_tokens += completion.completion_tokens;
            self.total_calls += 1;
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_prompt_tokens + self.total_completion_tokens
    }
}

impl Add for UsageLedger {
    type Output = UsageLedger;

    fn add(self, rhs: Self) -> Self {
        UsageLedger {
            total_prompt_tokens: self.total_prompt_tokens + rhs.total_prompt_tokens,
            total_completion_tokens: self.total_completion_tokens + rhs.total_completion_tokens,
            total_calls: self.total_calls + rhs.total_calls,
            cache_hits: self.cache_hits + rhs.cache_hits,
        }
    }
}

impl AddAssign for UsageLedger {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<'a> FromIterator<&'a Completion> for UsageLedger {
    fn from_iter<I: IntoIterator<Item = &'a Completion>>(iter: I) -> Self {
        let mut ledger = UsageLedger::default();
        for c in iter {
            ledger.record(c);
        }
        ledger
    }
}

/// Thread-safe ledger for a whole run.
#[derive(Debug, Default)]
pub struct SharedLedger {
    prompt: AtomicU64,
    completion: AtomicU64,
    calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl SharedLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, completion: &Completion) {
        if completion.from_cache {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
        } else {
            self.prompt.fetch_add(completion.prompt_tokens, Ordering::Relaxed);
            self.completion.fetch_add(completion.completion_tokens, Ordering::Relaxed);
            self.calls.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn absorb(&self, usage: &UsageLedger) {
        self.prompt.fetch_add(usage.total_prompt_tokens, Ordering::Relaxed);
        self.completion.fetch_add(usage.total_completion_tokens, Ordering::Relaxed);
        self.calls.fetch_add(usage.total_calls, Ordering::Relaxed);
        self.cache_hits.fetch_add(usage.cache_hits, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> UsageLedger {
        UsageLedger {
            total_prompt_tokens: self.prompt.load(Ordering::Relaxed),
            total_completion_tokens: self.completion.load(Ordering::Relaxed),
            total_calls: self.calls.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::TokenSource;
    use proptest::prelude::*;

    fn completion(p: u64, c: u64, cached: bool) -> Completion {
        Completion {
            text: String::new(),
            prompt_tokens: p,
            completion_tokens: c,
            from_cache: cached,
            token_source: TokenSource::Approx,
        }
    }

    proptest! {
        #[test]
        fn ledger_is_additive(calls in proptest::collection::vec((0u64..10_000, 0u64..10_000, any::<bool>()), 0..64)) {
            let completions: Vec<_> = calls.iter().map(|&(p, c, k)| completion(p, c, k)).collect();
            let ledger: UsageLedger = completions.iter().collect();
            let live = completions.iter().filter(|c| !c.from_cache);
            prop_assert_eq!(ledger.total_prompt_tokens, live.clone().map(|c| c.prompt_tokens).sum::<u64>());
            prop_assert_eq!(ledger.total_completion_tokens, live.clone().map(|c| c.completion_tokens).sum::<u64>());
            prop_assert_eq!(ledger.total_calls, live.count() as u64);
            prop_assert_eq!(ledger.cache_hits, completions.iter().filter(|c| c.from_cache).count() as u64);

            // split anywhere: sum of parts equals the whole
            let mid = completions.len() / 2;
            let left: UsageLedger = completions[..mid].iter().collect();
            let right: UsageLedger = completions[mid..].iter().collect();
            prop_assert_eq!(left + right, ledger);

            let shared = SharedLedger::new();
            std::thread::scope(|s| {
                for chunk in completions.chunks(7) {
                    let shared = &shared;
                    s.spawn(move || chunk.iter().for_each(|c| shared.record(c)));
                }
            });
            prop_assert_eq!(shared.snapshot(), ledger);
        }
    }
}
