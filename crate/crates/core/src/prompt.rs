//! Assembly of the introspective-debate prompt.
//!
//! The prompt is an XML-shaped document of fixed sections:
//! `Role`, `PromptCode`, `Rule`, optionally `Image Augment`, `ReasoningLogic`,
//! and finally `Task`, which carries the task statement and an answer-format
//! footer. Section bodies are static assets under `assets/inot/`; the only
//! substitution is the debate round limit inside `ReasoningLogic`.

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::task::{TaskInstance, TaskKind};

pub const DEFAULT_MAX_ROUNDS: u32 = 10;

const ROLE: &str = include_str!("../assets/inot/role.txt");
const PROMPT_CODE: &str = include_str!("../assets/inot/prompt_code.txt");
const RULE: &str = include_str!("../assets/inot/rule.txt");
const IMAGE_AUGMENT: &str = include_str!("../assets/inot/image_augment.txt");
const REASONING_LOGIC: &str = include_str!("../assets/inot/reasoning_logic.txt");

const FOOTER_QA: &str = include_str!("../assets/footers/qa.txt");
const FOOTER_MATH: &str = include_str!("../assets/footers/math.txt");
const FOOTER_CODE: &str = include_str!("../assets/footers/code.txt");
const FOOTER_IMAGE_QA: &str = include_str!("../assets/footers/image_qa.txt");

const MAX_ROUNDS_PLACEHOLDER: &str = "{max_rounds}";

pub const TAG_ROLE: &str = "Role";
pub const TAG_PROMPT_CODE: &str = "PromptCode";
pub const TAG_RULE: &str = "Rule";
pub const TAG_IMAGE_AUGMENT: &str = "Image Augment";
pub const TAG_REASONING_LOGIC: &str = "ReasoningLogic";
pub const TAG_TASK: &str = "Task";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Which sections the assembled prompt carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InotVariant {
    #[default]
    Full,
    /// Drops `Image Augment` even for image tasks.
    NoImageAugment,
    /// Drops the `PromptCode` definition block; `Role` and `Rule` stay.
    NoPromptCodeDefinition,
}

impl InotVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            InotVariant::Full => "full",
            InotVariant::NoImageAugment => "no_image_augment",
            InotVariant::NoPromptCodeDefinition => "no_prompt_code_definition",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSection {
    pub tag: String,
    pub body: String,
}

impl PromptSection {
    /// Tags must be non-empty and free of angle brackets; bodies always end
    /// in a newline so that the closing tag starts its own line.
    pub fn new(tag: impl Into<String>, body: impl Into<String>) -> Result<Self, PromptError> {
        let tag = tag.into();
        if tag.is_empty() || tag.contains(['<', '>']) {
            return Err(PromptError::InvalidConfig(format!("bad section tag {tag:?}")));
        }
        let mut body = body.into();
        if !body.ends_with('\n') {
            body.push('\n');
        }
        Ok(Self { tag, body })
    }

    pub fn render(&self) -> String {
        format!("<{tag}>\n{body}</{tag}>\n", tag = self.tag, body = self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub sections: Vec<PromptSection>,
    pub rendered: String,
    /// SHA-256 of `rendered`, hex.
    pub digest: String,
    pub max_rounds: u32,
    pub includes_image_augment: bool,
}

impl AssembledPrompt {
    pub fn tags(&self) -> Vec<&str> {
        self.sections.iter().map(|s| s.tag.as_str()).collect()
    }
}

pub fn should_include_image_augment(task: &TaskInstance, variant: InotVariant) -> bool {
    !task.images.is_empty() && variant != InotVariant::NoImageAugment
}

/// Answer-format instruction appended to every prompt for a task of `kind`.
pub fn answer_footer(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::Qa => FOOTER_QA,
        TaskKind::Math => FOOTER_MATH,
        TaskKind::Code => FOOTER_CODE,
        TaskKind::ImageQa => FOOTER_IMAGE_QA,
    }
}

/// Plain-text rendering of the task: statement, optional context, options.
/// Every strategy embeds exactly this text.
pub fn render_task_text(task: &TaskInstance) -> String {
    let mut out = task.statement.trim_end().to_string();
    out.push('\n');
    if let Some(ctx) = task.context.as_deref().filter(|c| !c.trim().is_empty()) {
        out.push_str("\nContext:\n");
        out.push_str(ctx.trim_end());
        out.push('\n');
    }
    let choices = task.choices();
    if !choices.is_empty() {
        out.push_str("\nOptions:\n");
        for (i, choice) in choices.iter().enumerate() {
            out.push_str(&format!("({}) {}\n", option_letter(i), choice));
        }
    }
    out
}

pub(crate) fn option_letter(index: usize) -> char {
    (b'A' + (index % 26) as u8) as char
}

pub fn render_inot_prompt(
    task: &TaskInstance,
    variant: InotVariant,
    max_rounds: u32,
) -> Result<AssembledPrompt, PromptError> {
    if task.statement.trim().is_empty() {
        return Err(PromptError::InvalidTask(format!("task {} has an empty statement", task.id)));
    }
    if max_rounds == 0 {
        return Err(PromptError::InvalidConfig("max_rounds must be at least 1".into()));
    }

    let include_image = should_include_image_augment(task, variant);
    let reasoning = REASONING_LOGIC.replace(MAX_ROUNDS_PLACEHOLDER, &max_rounds.to_string());

    let mut sections = vec![PromptSection::new(TAG_ROLE, ROLE)?];
    if variant != InotVariant::NoPromptCodeDefinition {
        sections.push(PromptSection::new(TAG_PROMPT_CODE, PROMPT_CODE)?);
    }
    sections.push(PromptSection::new(TAG_RULE, RULE)?);
    if include_image {
        sections.push(PromptSection::new(TAG_IMAGE_AUGMENT, IMAGE_AUGMENT)?);
    }
    sections.push(PromptSection::new(TAG_REASONING_LOGIC, reasoning)?);
    let task_body = format!("{}\n{}", render_task_text(task), answer_footer(task.kind));
    sections.push(PromptSection::new(TAG_TASK, task_body)?);

    let rendered: String = sections.iter().map(PromptSection::render).collect();
    let digest = sha256_hex(&rendered);
    Ok(AssembledPrompt {
        sections,
        rendered,
        digest,
        max_rounds,
        includes_image_augment: include_image,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// A closing tag with no open counterpart on the stack.
    UnmatchedClose,
    /// An opening tag still open at end of input.
    Unclosed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XmlViolation {
    pub tag: String,
    /// Byte offset of the offending tag in the input.
    pub offset: usize,
    pub kind: ViolationKind,
}

fn tag_pattern() -> &'static regex::Regex {
    static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| regex::Regex::new(r"<(/?)([A-Za-z][A-Za-z0-9_]*(?: [A-Za-z0-9_]+)*)>").unwrap())
}

/// Checks that tags close in LIFO order.
///
/// Prompt prose names sections inline (`<Reasoning Logic>`, `import <Image Augment>`),
/// so an opening tag that is still open when an enclosing element closes is
/// read as an inline reference and dropped. A closing tag that matches nothing
/// on the stack, or an element left open at end of input, is a violation.
pub fn validate_xml_balance(rendered: &str) -> Vec<XmlViolation> {
    let mut stack: Vec<(&str, usize)> = Vec::new();
    let mut violations = Vec::new();
    for caps in tag_pattern().captures_iter(rendered) {
        let whole = caps.get(0).unwrap();
        let name = caps.get(2).unwrap().as_str();
        if caps[1].is_empty() {
            stack.push((name, whole.start()));
            continue;
        }
        match stack.iter().rposition(|(open, _)| *open == name) {
            Some(pos) => stack.truncate(pos),
            None => violations.push(XmlViolation {
                tag: name.to_string(),
                offset: whole.start(),
                kind: ViolationKind::UnmatchedClose,
            }),
        }
    }
    violations.extend(stack.into_iter().map(|(tag, offset)| XmlViolation {
        tag: tag.to_string(),
        offset,
        kind: ViolationKind::Unclosed,
    }));
    violations.sort_by_key(|v| v.offset);
    violations
}
