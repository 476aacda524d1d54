//! Seeded shuffling, sampling and splitting.
//!
//! The permutation is a Fisher-Yates shuffle driven by ChaCha8 seeded with
//! `seed_from_u64(seed)`. Bounded draws use Lemire's multiply-shift with
//! rejection on raw `next_u64` output, so results depend only on the ChaCha8
//! stream and not on any library's sampling internals.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::task::TaskInstance;

pub const MATH_LEVELS: [u8; 2] = [4, 5];
pub const MATH_CATEGORIES: [&str; 3] = ["Combinatorics & Probability", "Pre-algebra", "Pre-calculus"];
pub const MATH_SUBSET_SIZE: usize = 600;

/// Validation/test partition with fixed 1:4 weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
}

impl SplitSpec {
    pub const VALIDATION_WEIGHT: usize = 1;
    pub const TEST_WEIGHT: usize = 4;

    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// round(n / 5); n/5 never lands on .5 so half-rounding never matters.
    pub fn validation_size(n: usize) -> usize {
        let total = Self::VALIDATION_WEIGHT + Self::TEST_WEIGHT;
        (n * Self::VALIDATION_WEIGHT + total / 2) / total
    }
}

/// Uniform integer in `0..bound`.
fn bounded(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let m = (rng.next_u64() as u128) * (bound as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

/// Seeded permutation of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = bounded(&mut rng, i as u64 + 1) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Shuffles then cuts: the first round(n/5) tasks are validation.
pub fn split_tasks(tasks: &[TaskInstance], spec: SplitSpec) -> (Vec<TaskInstance>, Vec<TaskInstance>) {
    let order = shuffled_indices(tasks.len(), spec.seed);
    let n_val = SplitSpec::validation_size(tasks.len());
    let mut shuffled = order.into_iter().map(|i| tasks[i].clone());
    let validation = shuffled.by_ref().take(n_val).collect();
    (validation, shuffled.collect())
}

/// `n` distinct tasks, kept in their original relative order.
pub fn sample_qa(tasks: &[TaskInstance], n: usize, seed: u64) -> Result<Vec<TaskInstance>, DatasetError> {
    if n > tasks.len() {
        return Err(DatasetError::SampleTooLarge {
            requested: n,
            available: tasks.len(),
        });
    }
    let mut chosen: Vec<usize> = shuffled_indices(tasks.len(), seed).into_iter().take(n).collect();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| tasks[i].clone()).collect())
}

fn meta<'t>(t: &'t TaskInstance, field: &str) -> Result<&'t str, DatasetError> {
    t.metadata
        .get(field)
        .map(String::as_str)
        .ok_or_else(|| DatasetError::MissingMetadata {
            id: t.id.clone(),
            field: field.to_string(),
        })
}

/// Level 4-5 problems from the three target categories, then a seeded sample
/// of up to 600 from the pooled set.
pub fn select_math_subset(tasks: &[TaskInstance], seed: u64) -> Result<Vec<TaskInstance>, DatasetError> {
    let mut eligible = Vec::new();
    for t in tasks {
        let level = meta(t, "level")?;
        let category = meta(t, "category")?;
        let level_ok = level.parse::<u8>().is_ok_and(|l| MATH_LEVELS.contains(&l));
        if level_ok && MATH_CATEGORIES.contains(&category) {
            eligible.push(t.clone());
        }
    }
    if eligible.len() < MATH_SUBSET_SIZE {
        log::warn!(
            "only {} eligible MATH problems, fewer than {MATH_SUBSET_SIZE}; using all",
            eligible.len()
        );
        return Ok(eligible);
    }
    sample_qa(&eligible, MATH_SUBSET_SIZE, seed)
}

/// Per-category counts, for the run manifest.
pub fn category_counts(tasks: &[TaskInstance]) -> BTreeMap<String, usize> {
    super::counts_by(tasks, "category")
}
