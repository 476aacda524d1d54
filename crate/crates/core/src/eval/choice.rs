use std::sync::OnceLock;

use regex::Regex;

use super::normalize_answer;

fn letter_index(letter: &str, n_choices: usize) -> Option<usize> {
    let c = letter.chars().next()?.to_ascii_uppercase();
    let idx = (c as u8).checked_sub(b'A')? as usize;
    (idx < n_choices && idx < 26).then_some(idx)
}

/// Maps a gold label (option letter or option text) to an option index.
pub fn resolve_choice(label: &str, choices: &[String]) -> Option<usize> {
    let label = label.trim();
    if label.chars().count() == 1 {
        if let Some(i) = letter_index(label, choices.len()) {
            return Some(i);
        }
    }
    let norm = normalize_answer(label);
    choices.iter().position(|c| normalize_answer(c) == norm)
}

/// Reads the option a prediction selects: a leading letter (`B`, `B)`, `(B`, `B.`),
/// then a parenthesized letter anywhere, then "answer is X", and finally a unique
/// option-text match.
pub fn parse_choice(prediction: &str, choices: &[String]) -> Option<usize> {
    static LEADING: OnceLock<Regex> = OnceLock::new();
    static PAREN: OnceLock<Regex> = OnceLock::new();
    static ANSWER_IS: OnceLock<Regex> = OnceLock::new();
    let leading = LEADING.get_or_init(|| Regex::new(r"^(?:\(([A-Za-z])|([A-Za-z])(?:[).:]|$))").unwrap());
    let paren = PAREN.get_or_init(|| Regex::new(r"\(([A-Za-z])\)").unwrap());
    let answer_is = ANSWER_IS.get_or_init(|| Regex::new(r"(?i:answer is)\s+([A-Z])\b").unwrap());

    let text = prediction.trim();
    if let Some(caps) = leading.captures(text) {
        let letter = caps.get(1).or_else(|| caps.get(2)).unwrap().as_str();
        if let Some(i) = letter_index(letter, choices.len()) {
            return Some(i);
        }
    }
    for re in [paren, answer_is] {
        if let Some(caps) = re.captures_iter(text).last() {
            if let Some(i) = letter_index(&caps[1], choices.len()) {
                return Some(i);
            }
        }
    }
    let padded = format!(" {} ", normalize_answer(text));
    let mut hits = choices.iter().enumerate().filter(|(_, c)| {
        let c = normalize_answer(c);
        !c.is_empty() && padded.contains(&format!(" {c} "))
    });
    match (hits.next(), hits.next()) {
        (Some((i, _)), None) => Some(i),
        _ => None,
    }
}

/// 1 if the prediction selects the gold option, else 0.
pub fn choice_accuracy(prediction: &str, gold_choice: &str, choices: &[String]) -> u8 {
    match (parse_choice(prediction, choices), resolve_choice(gold_choice, choices)) {
        (Some(p), Some(g)) if p == g => 1,
        _ => 0,
    }
}
