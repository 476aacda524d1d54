use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::session::{CallOptions, Session};
use super::{extract, FinalReply, StrategyError, SAMPLING_TEMPERATURE};
use crate::backend::Backend;
use crate::eval::{canonical_math, normalize_answer, parse_choice};
use crate::prompt::{answer_footer, render_inot_prompt, render_task_text, InotVariant};
use crate::task::{TaskInstance, TaskKind};

const COT: &str = include_str!("../../assets/strategies/cot.txt");
const LOGICOT_VERIFY: &str = include_str!("../../assets/strategies/logicot_verify.txt");
const LOGICOT_REVISE: &str = include_str!("../../assets/strategies/logicot_revise.txt");
const TOT_PROPOSE: &str = include_str!("../../assets/strategies/tot_propose.txt");
const TOT_SCORE: &str = include_str!("../../assets/strategies/tot_score.txt");
const TOT_SYNTHESIZE: &str = include_str!("../../assets/strategies/tot_synthesize.txt");
const IOT_GUIDANCE: &str = include_str!("../../assets/strategies/iot_guidance.txt");
const IOT_GUIDANCE_AUTONOMOUS: &str = include_str!("../../assets/strategies/iot_guidance_autonomous.txt");
const IOT_RESPOND: &str = include_str!("../../assets/strategies/iot_respond.txt");

type Step<T> = Result<T, StrategyError>;

fn task_text(task: &TaskInstance) -> String {
    render_task_text(task)
}

fn footer(task: &TaskInstance) -> &'static str {
    answer_footer(task.kind)
}

pub(super) fn io<B: Backend + ?Sized>(s: &mut Session<'_, B>) -> Step<FinalReply> {
    let prompt = format!("{}\n{}", task_text(s.task), footer(s.task));
    Ok(FinalReply::Raw(s.call("io", prompt, CallOptions::default())?))
}

fn cot_prompt(task: &TaskInstance) -> String {
    format!("{}\n{}\n{}", task_text(task), COT, footer(task))
}

pub(super) fn cot<B: Backend + ?Sized>(s: &mut Session<'_, B>) -> Step<FinalReply> {
    let prompt = cot_prompt(s.task);
    Ok(FinalReply::Raw(s.call("cot", prompt, CallOptions::default())?))
}

/// Equivalence class of an answer for voting.
pub(crate) fn vote_key(task: &TaskInstance, answer: &str) -> String {
    let trimmed = answer.trim();
    match task.kind {
        TaskKind::Math => canonical_math(trimmed).key(),
        TaskKind::Code => trimmed.to_string(),
        TaskKind::Qa | TaskKind::ImageQa => {
            if let Some(i) = parse_choice(trimmed, task.choices()) {
                return format!("choice:{i}");
            }
            let norm = normalize_answer(trimmed);
            if norm.is_empty() {
                trimmed.to_lowercase()
            } else {
                norm
            }
        }
    }
}

/// Majority vote over non-empty answers; ties go to the lexicographically
/// smallest key. Returns the first answer of the winning class.
pub(crate) fn majority_vote(task: &TaskInstance, answers: &[String]) -> String {
    let mut tally: BTreeMap<String, (usize, &String)> = BTreeMap::new();
    for a in answers.iter().filter(|a| !a.trim().is_empty()) {
        tally.entry(vote_key(task, a)).or_insert((0, a)).0 += 1;
    }
    // BTreeMap iterates keys ascending; strict > keeps the smallest key on ties
    let mut best: Option<(usize, &String)> = None;
    for (count, answer) in tally.values() {
        if best.is_none_or(|(c, _)| *count > c) {
            best = Some((*count, answer));
        }
    }
    best.map(|(_, a)| a.clone()).unwrap_or_default()
}

pub(super) fn sccot<B: Backend + ?Sized>(s: &mut Session<'_, B>, samples: u32) -> Step<FinalReply> {
    let prompt = cot_prompt(s.task);
    let temperature = s.temperature().max(SAMPLING_TEMPERATURE);
    let mut answers = Vec::with_capacity(samples as usize);
    for i in 0..samples {
        let opts = CallOptions {
            temperature: Some(temperature),
            seed: Some(i as u64),
            ..Default::default()
        };
        let reply = s.call(format!("sample_{i}"), prompt.clone(), opts)?;
        answers.push(extract(s.task, &reply));
    }
    Ok(FinalReply::Extracted(majority_vote(s.task, &answers)))
}

/// True when the verifier's last non-empty line is exactly VERIFIED.
pub(crate) fn verification_passed(reply: &str) -> bool {
    reply
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.trim_matches(|c: char| !c.is_alphanumeric()).eq_ignore_ascii_case("verified"))
        .unwrap_or(false)
}

pub(super) fn logicot<B: Backend + ?Sized>(s: &mut Session<'_, B>) -> Step<(FinalReply, u32)> {
    let chain = s.call("chain", cot_prompt(s.task), CallOptions::default())?;
    let verify_prompt = format!(
        "{}\nTask:\n{}\nSolution:\n{}\n",
        LOGICOT_VERIFY,
        task_text(s.task),
        chain.trim_end()
    );
    let verdict = s.call("verify", verify_prompt, CallOptions::default())?;
    if verification_passed(&verdict) {
        return Ok((FinalReply::Raw(chain), 0));
    }
    let revise_prompt = format!(
        "{}\nYour previous solution:\n{}\n\nReviewer feedback:\n{}\n\n{}\n{}",
        task_text(s.task),
        chain.trim_end(),
        verdict.trim_end(),
        LOGICOT_REVISE,
        footer(s.task)
    );
    let revised = s.call("revise", revise_prompt, CallOptions::default())?;
    Ok((FinalReply::Raw(revised), 1))
}

/// First integer in a rating reply, 0 when none.
pub(crate) fn parse_rating(reply: &str) -> u32 {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\d+").unwrap());
    re.find(reply)
        .and_then(|m| m.as_str().parse::<u64>().ok())
        .map_or(0, |v| v.min(u32::MAX as u64) as u32)
}

fn render_path(path: &[String]) -> String {
    if path.is_empty() {
        return "(none yet)\n".into();
    }
    path.iter()
        .enumerate()
        .map(|(i, step)| format!("Step {}: {}\n", i + 1, step.trim()))
        .collect()
}

pub(super) fn tot<B: Backend + ?Sized>(s: &mut Session<'_, B>, breadth: u32, depth: u32) -> Step<FinalReply> {
    let task = task_text(s.task);
    let mut path: Vec<String> = Vec::new();
    for level in 0..depth {
        let so_far = render_path(&path);
        let mut candidates = Vec::with_capacity(breadth as usize);
        for j in 0..breadth {
            let prompt = format!("{TOT_PROPOSE}\nTask:\n{task}\nReasoning so far:\n{so_far}");
            let opts = CallOptions {
                seed: Some(j as u64),
                ..Default::default()
            };
            candidates.push(s.call(format!("propose_{level}_{j}"), prompt, opts)?);
        }
        let mut best: Option<(u32, usize)> = None;
        for (j, candidate) in candidates.iter().enumerate() {
            let mut extended = path.clone();
            extended.push(candidate.clone());
            let prompt = format!("{TOT_SCORE}\nTask:\n{task}\nPartial reasoning:\n{}", render_path(&extended));
            let rating = parse_rating(&s.call(format!("score_{level}_{j}"), prompt, CallOptions::default())?);
            if best.is_none_or(|(r, _)| rating > r) {
                best = Some((rating, j));
            }
        }
        let (_, chosen) = best.expect("breadth >= 1");
        path.push(candidates.swap_remove(chosen));
    }
    let prompt = format!(
        "{task}\n{TOT_SYNTHESIZE}\nReasoning path:\n{}\n{}",
        render_path(&path),
        footer(s.task)
    );
    Ok(FinalReply::Raw(s.call("synthesize", prompt, CallOptions::default())?))
}

/// Guidance replies carrying the standalone word STOP end an autonomous loop.
pub(crate) fn has_stop_marker(reply: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bSTOP\b").unwrap()).is_match(reply)
}

/// Iteration of thought: (guidance, response) pairs. The guided form always
/// runs `iterations`; the autonomous form finishes the iteration whose
/// guidance emitted STOP and ends there.
pub(super) fn iot<B: Backend + ?Sized>(
    s: &mut Session<'_, B>,
    iterations: u32,
    autonomous: bool,
) -> Step<(FinalReply, u32)> {
    let task = task_text(s.task);
    let guidance_text = if autonomous { IOT_GUIDANCE_AUTONOMOUS } else { IOT_GUIDANCE };
    let mut answer = String::from("(no answer yet)");
    let mut used = 0;
    for i in 0..iterations {
        used = i + 1;
        let guide_prompt = format!("{guidance_text}\nTask:\n{task}\nCurrent answer:\n{}\n", answer.trim_end());
        let guidance = s.call(format!("guide_{i}"), guide_prompt, CallOptions::default())?;
        let respond_prompt = format!(
            "{task}\n{IOT_RESPOND}\nGuidance:\n{}\n\nCurrent answer:\n{}\n\n{}",
            guidance.trim_end(),
            answer.trim_end(),
            footer(s.task)
        );
        answer = s.call(format!("respond_{i}"), respond_prompt, CallOptions::default())?;
        if autonomous && has_stop_marker(&guidance) {
            break;
        }
    }
    Ok((FinalReply::Raw(answer), used))
}

pub(super) fn inot<B: Backend + ?Sized>(
    s: &mut Session<'_, B>,
    variant: InotVariant,
    max_rounds: u32,
) -> Step<FinalReply> {
    let prompt = render_inot_prompt(s.task, variant, max_rounds)?;
    Ok(FinalReply::Raw(s.call("inot", prompt.rendered, CallOptions::default())?))
}
