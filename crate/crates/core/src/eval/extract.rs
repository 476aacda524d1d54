use std::sync::OnceLock;

use regex::Regex;

use crate::task::TaskKind;

/// Pulls the final answer out of a model reply.
///
/// - Math: text after the last `####`, else the last `\boxed{...}`, else the last number.
/// - Code: body of the last fenced block, else the whole reply.
/// - QA / image QA: text after the last `Answer:` marker, else the whole reply.
///
/// All results are trimmed; an empty string means nothing was found.
pub fn extract_final_answer(kind: TaskKind, completion_text: &str) -> String {
    match kind {
        TaskKind::Math => extract_math(completion_text),
        TaskKind::Code => extract_code(completion_text),
        TaskKind::Qa | TaskKind::ImageQa => extract_marked(completion_text),
    }
}

fn extract_math(text: &str) -> String {
    if let Some(pos) = text.rfind("####") {
        let rest = text[pos + 4..].trim();
        let line = rest.lines().next().unwrap_or("").trim();
        if !line.is_empty() {
            return line.to_string();
        }
    }
    if let Some(boxed) = last_boxed(text) {
        return boxed.trim().to_string();
    }
    last_number(text).unwrap_or_default()
}

/// Content of the last `\boxed{...}` (or `\fbox{...}`) with balanced braces.
pub(crate) fn last_boxed(text: &str) -> Option<String> {
    let start = ["\\boxed{", "\\fbox{"]
        .iter()
        .filter_map(|m| text.rfind(m).map(|p| p + m.len()))
        .max()?;
    let mut depth = 1usize;
    for (i, c) in text[start..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(text[start..start + i].to_string());
                }
            }
            _ => {}
        }
    }
    None
}

fn last_number(text: &str) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"-?\d+(?:,\d{3})*(?:\.\d+)?(?:/\d+)?").unwrap());
    re.find_iter(text).last().map(|m| m.as_str().to_string())
}

fn extract_code(text: &str) -> String {
    let fences: Vec<usize> = text.match_indices("```").map(|(i, _)| i).collect();
    if fences.is_empty() {
        return text.trim().to_string();
    }
    // pair fences in order; a trailing unpaired fence opens a truncated block
    let (open, close) = if fences.len() % 2 == 0 {
        (fences[fences.len() - 2], Some(fences[fences.len() - 1]))
    } else {
        (fences[fences.len() - 1], None)
    };
    let after_fence = &text[open + 3..close.unwrap_or(text.len())];
    let body = match after_fence.find('\n') {
        Some(nl) => &after_fence[nl + 1..],
        None => after_fence,
    };
    body.trim_matches('\n').trim_end().to_string()
}

fn extract_marked(text: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?i)answer:").unwrap());
    match re.find_iter(text).last() {
        Some(m) => text[m.end()..].trim().to_string(),
        None => text.trim().to_string(),
    }
}
