use std::collections::HashMap;

use super::EvalError;

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// SQuAD-style answer normalization: lowercase, drop ASCII punctuation,
/// drop the articles "a", "an", "the" as whole words, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    stripped
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

fn f1_single(prediction: &str, gold: &str) -> f64 {
    let pred = normalize_answer(prediction);
    let gold = normalize_answer(gold);
    let pred_tokens: Vec<&str> = pred.split_whitespace().collect();
    let gold_tokens: Vec<&str> = gold.split_whitespace().collect();
    if pred_tokens.is_empty() || gold_tokens.is_empty() {
        return if pred_tokens.is_empty() && gold_tokens.is_empty() { 1.0 } else { 0.0 };
    }
    let mut gold_counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold_tokens {
        *gold_counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &pred_tokens {
        if let Some(n) = gold_counts.get_mut(t) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred_tokens.len() as f64;
    let recall = overlap as f64 / gold_tokens.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Token-level F1 after normalization, maximized over the gold answers.
pub fn token_f1<S: AsRef<str>>(prediction: &str, golds: &[S]) -> Result<f64, EvalError> {
    if golds.is_empty() {
        return Err(EvalError::EmptyGolds);
    }
    Ok(golds
        .iter()
        .map(|g| f1_single(prediction, g.as_ref()))
        .fold(0.0, f64::max))
}
