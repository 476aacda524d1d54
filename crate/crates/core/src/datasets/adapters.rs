use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use super::DatasetError;
use crate::eval::last_boxed;
use crate::task::{Gold, ImageRef, TaskInstance, TaskKind, TestCase, TestSuite};

/// Source schema of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Adapter {
    /// One serialized `TaskInstance` per line.
    Internal,
    /// Distractor-setting records: `_id`, `question`, `answer`, `context: [[title, [sentences]]]`.
    HotpotQa,
    /// SQuAD v1.1 nested JSON (`data[].paragraphs[].qas[]`), or flat rows with
    /// `id`, `question`, `context`, `answers`.
    Squad,
    /// `task_id`, `prompt`, `test`, `entry_point`.
    HumanEval,
    /// `task_id`, `text`, `test_list`, optional `test_setup_code`.
    Mbpp,
    /// `question`, `answer` ending in `#### <gold>`. Pool = canonical test file.
    Gsm8k,
    /// `problem`, `level` ("Level 5"), `type`, `solution` with a final `\boxed{}`.
    Math,
    /// `question`, `choices`, `answer` (index), `image`, optional `hint`. Records
    /// without an image are filtered out.
    ScienceQaImg,
    /// `question_id`, `image`, `text`, `answer`, optional `category`.
    LlavaBenchCoco,
    LlavaBenchWild,
}

impl Adapter {
    pub const ALL: [Adapter; 10] = [
        Adapter::Internal,
        Adapter::HotpotQa,
        Adapter::Squad,
        Adapter::HumanEval,
        Adapter::Mbpp,
        Adapter::Gsm8k,
        Adapter::Math,
        Adapter::ScienceQaImg,
        Adapter::LlavaBenchCoco,
        Adapter::LlavaBenchWild,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Adapter::Internal => "internal",
            Adapter::HotpotQa => "hotpotqa",
            Adapter::Squad => "squad",
            Adapter::HumanEval => "humaneval",
            Adapter::Mbpp => "mbpp",
            Adapter::Gsm8k => "gsm8k",
            Adapter::Math => "math",
            Adapter::ScienceQaImg => "scienceqa_img",
            Adapter::LlavaBenchCoco => "llava_bench_coco",
            Adapter::LlavaBenchWild => "llava_bench_wild",
        }
    }

    pub(super) fn filter_reason(self) -> &'static str {
        match self {
            Adapter::ScienceQaImg => "record has no image",
            _ => "record filtered by adapter",
        }
    }
}

impl fmt::Display for Adapter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Adapter {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Adapter::ALL
            .into_iter()
            .find(|a| a.as_str() == key)
            .ok_or_else(|| DatasetError::UnknownAdapter(s.to_string()))
    }
}

type Located = Vec<(String, Value)>;

/// Splits file text into located JSON records.
pub(super) fn records(adapter: Adapter, text: &str) -> Result<Located, (String, String)> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.starts_with('[') || (trimmed.starts_with('{') && adapter == Adapter::Squad && is_single_document(text)) {
        let doc: Value = serde_json::from_str(text).map_err(|e| ("document".to_string(), e.to_string()))?;
        let items = match (adapter, doc) {
            (Adapter::Squad, Value::Object(obj)) => flatten_squad(&obj).map_err(|m| ("document".to_string(), m))?,
            (_, Value::Array(items)) => items,
            _ => return Err(("document".into(), "expected a JSON array of records".into())),
        };
        return Ok(items
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("record {}", i + 1), v))
            .collect());
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("line {}", i + 1);
        // unparseable lines become Null and are reported by map_record
        let value = serde_json::from_str(line).unwrap_or(Value::Null);
        out.push((location, value));
    }
    Ok(out)
}

fn is_single_document(text: &str) -> bool {
    serde_json::from_str::<Value>(text).is_ok_and(|v| v.get("data").is_some())
}

fn flatten_squad(doc: &serde_json::Map<String, Value>) -> Result<Vec<Value>, String> {
    let articles = doc.get("data").and_then(Value::as_array).ok_or("missing `data` array")?;
    let mut out = Vec::new();
    for article in articles {
        let title = article.get("title").cloned().unwrap_or(Value::Null);
        for para in article.get("paragraphs").and_then(Value::as_array).into_iter().flatten() {
            let context = para.get("context").cloned().unwrap_or(Value::Null);
            for qa in para.get("qas").and_then(Value::as_array).into_iter().flatten() {
                let mut row = qa.clone();
                if let Value::Object(m) = &mut row {
                    m.insert("context".into(), context.clone());
                    m.insert("title".into(), title.clone());
                }
                out.push(row);
            }
        }
    }
    Ok(out)
}

fn field<'v>(v: &'v Value, name: &str) -> Result<&'v Value, String> {
    v.get(name).filter(|x| !x.is_null()).ok_or_else(|| format!("missing field `{name}`"))
}

fn string(v: &Value, name: &str) -> Result<String, String> {
    match field(v, name)? {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(format!("field `{name}` is not a string")),
    }
}

fn opt_string(v: &Value, name: &str) -> Option<String> {
    string(v, name).ok().filter(|s| !s.trim().is_empty())
}

fn string_list(v: &Value, name: &str) -> Result<Vec<String>, String> {
    field(v, name)?
        .as_array()
        .ok_or_else(|| format!("field `{name}` is not a list"))?
        .iter()
        .map(|x| {
            x.as_str()
                .map(str::to_string)
                .ok_or_else(|| format!("field `{name}` holds a non-string"))
        })
        .collect()
}

fn image(root: &Path, rel: &str) -> ImageRef {
    let p = Path::new(rel);
    ImageRef::new(if p.is_absolute() { p.to_path_buf() } else { root.join(p) })
}

pub(super) fn map_record(adapter: Adapter, v: &Value, index: usize, root: &Path) -> Result<Option<TaskInstance>, String> {
    if !v.is_object() {
        return Err("record is not a JSON object".into());
    }
    let task = match adapter {
        Adapter::Internal => {
            let mut t: TaskInstance = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
            for img in &mut t.images {
                if img.path.is_relative() {
                    img.path = root.join(&img.path);
                }
            }
            t
        }
        Adapter::HotpotQa => hotpot(v)?,
        Adapter::Squad => squad(v)?,
        Adapter::HumanEval => humaneval(v)?,
        Adapter::Mbpp => mbpp(v)?,
        Adapter::Gsm8k => gsm8k(v, index)?,
        Adapter::Math => math(v, index)?,
        Adapter::ScienceQaImg => match scienceqa(v, index, root)? {
            Some(t) => t,
            None => return Ok(None),
        },
        Adapter::LlavaBenchCoco | Adapter::LlavaBenchWild => llava(v, adapter, root)?,
    };
    Ok(Some(task))
}

fn hotpot(v: &Value) -> Result<TaskInstance, String> {
    let id = string(v, "_id").or_else(|_| string(v, "id"))?;
    let mut t = TaskInstance::new(
        id,
        TaskKind::Qa,
        string(v, "question")?,
        Gold::Answers {
            answers: vec![string(v, "answer")?],
        },
    )
    .with_meta("source", "hotpotqa");
    if let Some(ctx) = v.get("context") {
        let mut paragraphs = Vec::new();
        match ctx {
            // [[title, [sentences]]]
            Value::Array(items) => {
                for item in items {
                    let title = item.get(0).and_then(Value::as_str).ok_or("malformed context entry")?;
                    let sentences: String = item
                        .get(1)
                        .and_then(Value::as_array)
                        .ok_or("malformed context entry")?
                        .iter()
                        .filter_map(Value::as_str)
                        .collect();
                    paragraphs.push(format!("{title}: {}", sentences.trim()));
                }
            }
            // {title: [...], sentences: [[...]]}
            Value::Object(m) => {
                let titles = m.get("title").and_then(Value::as_array).ok_or("malformed context")?;
                let sents = m.get("sentences").and_then(Value::as_array).ok_or("malformed context")?;
                for (title, s) in titles.iter().zip(sents) {
                    let body: String = s.as_array().into_iter().flatten().filter_map(Value::as_str).collect();
                    paragraphs.push(format!("{}: {}", title.as_str().unwrap_or(""), body.trim()));
                }
            }
            Value::String(s) => paragraphs.push(s.clone()),
            _ => return Err("malformed context".into()),
        }
        if !paragraphs.is_empty() {
            t = t.with_context(paragraphs.join("\n"));
        }
    }
    for key in ["type", "level"] {
        if let Some(val) = opt_string(v, key) {
            t = t.with_meta(key, val);
        }
    }
    Ok(t)
}

fn squad(v: &Value) -> Result<TaskInstance, String> {
    let answers_field = field(v, "answers")?;
    let mut answers: Vec<String> = match answers_field {
        Value::Array(items) => items
            .iter()
            .filter_map(|a| a.get("text").and_then(Value::as_str).or_else(|| a.as_str()))
            .map(str::to_string)
            .collect(),
        Value::Object(_) => string_list(answers_field, "text")?,
        _ => return Err("field `answers` is malformed".into()),
    };
    let mut seen = std::collections::HashSet::new();
    answers.retain(|a| seen.insert(a.clone()));
    if answers.is_empty() {
        return Err("no gold answers".into());
    }
    let mut t = TaskInstance::new(string(v, "id")?, TaskKind::Qa, string(v, "question")?, Gold::Answers { answers })
        .with_context(string(v, "context")?)
        .with_meta("source", "squad");
    if let Some(title) = opt_string(v, "title") {
        t = t.with_meta("title", title);
    }
    Ok(t)
}

fn humaneval(v: &Value) -> Result<TaskInstance, String> {
    let entry = string(v, "entry_point")?;
    let suite = TestSuite {
        setup: string(v, "test")?,
        cases: vec![TestCase {
            name: "check".into(),
            code: format!("check({entry})"),
        }],
    };
    Ok(TaskInstance::new(string(v, "task_id")?, TaskKind::Code, string(v, "prompt")?, Gold::Tests { suite })
        .with_meta("entry_point", entry)
        .with_meta("source", "humaneval"))
}

fn mbpp(v: &Value) -> Result<TaskInstance, String> {
    let tests = string_list(v, "test_list")?;
    if tests.is_empty() {
        return Err("empty `test_list`".into());
    }
    let statement = format!(
        "{}\nYour code should pass these tests:\n{}",
        string(v, "text").or_else(|_| string(v, "prompt"))?.trim(),
        tests.join("\n")
    );
    let suite = TestSuite {
        setup: opt_string(v, "test_setup_code").unwrap_or_default(),
        cases: tests
            .into_iter()
            .enumerate()
            .map(|(i, code)| TestCase {
                name: format!("test_{i}"),
                code,
            })
            .collect(),
    };
    Ok(TaskInstance::new(
        format!("mbpp/{}", string(v, "task_id")?),
        TaskKind::Code,
        statement,
        Gold::Tests { suite },
    )
    .with_meta("source", "mbpp"))
}

fn gsm8k(v: &Value, index: usize) -> Result<TaskInstance, String> {
    let answer = string(v, "answer")?;
    let (_, gold) = answer.rsplit_once("####").ok_or("answer lacks a `####` marker")?;
    let gold = gold.trim().replace(',', "");
    if gold.is_empty() {
        return Err("empty gold after `####`".into());
    }
    let id = opt_string(v, "id").unwrap_or_else(|| format!("gsm8k-{index:05}"));
    Ok(TaskInstance::new(id, TaskKind::Math, string(v, "question")?, Gold::Answers { answers: vec![gold] })
        .with_meta("source", "gsm8k"))
}

/// MATH `type` values mapped to the category names used for subset selection.
pub(super) fn canonical_math_category(raw: &str) -> String {
    match raw.trim().to_ascii_lowercase().replace(['_', '-'], " ").as_str() {
        "counting & probability" | "counting and probability" | "combinatorics & probability" => {
            "Combinatorics & Probability".into()
        }
        "prealgebra" | "pre algebra" => "Pre-algebra".into(),
        "precalculus" | "pre calculus" => "Pre-calculus".into(),
        _ => raw.trim().to_string(),
    }
}

fn math(v: &Value, index: usize) -> Result<TaskInstance, String> {
    let level_raw = string(v, "level")?;
    let level = level_raw
        .trim()
        .trim_start_matches("Level")
        .trim()
        .parse::<u8>()
        .map_err(|_| format!("unrecognized level {level_raw:?}"))?;
    let gold = match opt_string(v, "answer") {
        Some(a) => a,
        None => last_boxed(&string(v, "solution")?).ok_or("solution has no \\boxed{} answer")?,
    };
    let id = opt_string(v, "unique_id")
        .or_else(|| opt_string(v, "id"))
        .unwrap_or_else(|| format!("math-{index:05}"));
    Ok(TaskInstance::new(id, TaskKind::Math, string(v, "problem")?, Gold::Answers { answers: vec![gold] })
        .with_meta("level", level.to_string())
        .with_meta("category", canonical_math_category(&string(v, "type")?))
        .with_meta("source", "math"))
}

fn scienceqa(v: &Value, index: usize, root: &Path) -> Result<Option<TaskInstance>, String> {
    let Some(img) = opt_string(v, "image") else {
        return Ok(None);
    };
    let choices = string_list(v, "choices")?;
    let answer = field(v, "answer")?
        .as_u64()
        .ok_or("field `answer` is not an index")? as usize;
    if answer >= choices.len() || answer >= 26 {
        return Err(format!("answer index {answer} out of range"));
    }
    let letter = ((b'A' + answer as u8) as char).to_string();
    let id = opt_string(v, "id").unwrap_or_else(|| format!("scienceqa-{index:05}"));
    let mut t = TaskInstance::new(id, TaskKind::ImageQa, string(v, "question")?, Gold::Choice { answer: letter, choices })
        .with_image(image(root, &img))
        .with_meta("source", "scienceqa_img");
    if let Some(hint) = opt_string(v, "hint") {
        t = t.with_context(hint);
    }
    Ok(Some(t))
}

fn llava(v: &Value, adapter: Adapter, root: &Path) -> Result<TaskInstance, String> {
    let answer = string(v, "answer").or_else(|_| string(v, "gpt_answer"))?;
    let mut t = TaskInstance::new(
        format!("{}-{}", adapter.as_str(), string(v, "question_id")?),
        TaskKind::ImageQa,
        string(v, "text").or_else(|_| string(v, "question"))?,
        Gold::Answers { answers: vec![answer] },
    )
    .with_image(image(root, &string(v, "image")?))
    .with_meta("source", adapter.as_str());
    if let Some(c) = opt_string(v, "category") {
        t = t.with_meta("category", c);
    }
    Ok(t)
}
