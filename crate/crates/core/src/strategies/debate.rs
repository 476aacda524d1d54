//! Two-agent debate with every phase as a separate model call.
//!
//! Call order: `reason_A`, `reason_B`, then per round `argue_{A,B}`,
//! `critique_{A,B}`, `rebut_{A,B}`, `adjust_{A,B}`. The loop continues while
//! the agents disagree and fewer than `max_rounds` rounds have run. Each call
//! carries the agent's role, the task, and only the latest message it reacts to.

use super::session::{CallOptions, Session};
use super::{debate_converged, extract, FinalReply, StrategyError};
use crate::backend::Backend;
use crate::prompt::{answer_footer, render_task_text};

const AGENT_ROLE: &str = include_str!("../../assets/strategies/debate_agent.txt");

const REASON: &str = "Reason about the task independently. Explain your thought process, then state your result.";
const ARGUE: &str = "Present your argument for your current result.";
const CRITIQUE: &str = "Critique the other agent's argument below. Point out any errors or gaps in its reasoning.";
const REBUT: &str =
    "Respond to the other agent's critique of your reasoning below. Defend what is correct and acknowledge what is not.";
const ADJUST: &str = "Adjust your reasoning based on the other agent's rebuttal below, then state your refined result.";

#[derive(Clone, Copy)]
enum Agent {
    A,
    B,
}

impl Agent {
    fn name(self) -> &'static str {
        match self {
            Agent::A => "Agent_A",
            Agent::B => "Agent_B",
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Agent::A => "A",
            Agent::B => "B",
        }
    }
}

pub(super) fn external_debate<B: Backend + ?Sized>(
    s: &mut Session<'_, B>,
    max_rounds: u32,
) -> Result<(FinalReply, u32), StrategyError> {
    let task = render_task_text(s.task);
    let footer = answer_footer(s.task.kind);
    let roles = [
        AGENT_ROLE.replace("{agent}", Agent::A.name()),
        AGENT_ROLE.replace("{agent}", Agent::B.name()),
    ];
    let role = |agent: Agent| match agent {
        Agent::A => roles[0].as_str(),
        Agent::B => roles[1].as_str(),
    };

    let phase = |s: &mut Session<'_, B>, label: &str, agent: Agent, instruction: &str, input: Option<(&str, &str)>, with_footer: bool| {
        let mut prompt = format!("{instruction}\n\nTask:\n{task}");
        if let Some((heading, text)) = input {
            prompt.push_str(&format!("\n{heading}:\n{}\n", text.trim_end()));
        }
        if with_footer {
            prompt.push('\n');
            prompt.push_str(footer);
        }
        let opts = CallOptions {
            system: Some(role(agent)),
            ..Default::default()
        };
        s.call(format!("{label}_{}", agent.suffix()), prompt, opts)
    };

    let reason_a = phase(s, "reason", Agent::A, REASON, None, true)?;
    let reason_b = phase(s, "reason", Agent::B, REASON, None, true)?;
    let mut result_a = extract(s.task, &reason_a);
    let mut result_b = extract(s.task, &reason_b);

    let mut counter = 0;
    let mut agreement = false;
    while !agreement && counter < max_rounds {
        counter += 1;
        let argument_a = phase(s, "argue", Agent::A, ARGUE, Some(("Your current result", &result_a)), false)?;
        let argument_b = phase(s, "argue", Agent::B, ARGUE, Some(("Your current result", &result_b)), false)?;
        let critique_a = phase(s, "critique", Agent::A, CRITIQUE, Some(("Other agent's argument", &argument_b)), false)?;
        let critique_b = phase(s, "critique", Agent::B, CRITIQUE, Some(("Other agent's argument", &argument_a)), false)?;
        let rebuttal_a = phase(s, "rebut", Agent::A, REBUT, Some(("Other agent's critique", &critique_b)), false)?;
        let rebuttal_b = phase(s, "rebut", Agent::B, REBUT, Some(("Other agent's critique", &critique_a)), false)?;
        let adjusted_a = phase(s, "adjust", Agent::A, ADJUST, Some(("Other agent's rebuttal", &rebuttal_b)), true)?;
        let adjusted_b = phase(s, "adjust", Agent::B, ADJUST, Some(("Other agent's rebuttal", &rebuttal_a)), true)?;
        result_a = extract(s.task, &adjusted_a);
        result_b = extract(s.task, &adjusted_b);
        agreement = debate_converged(&result_a, &result_b);
    }
    // without agreement the first agent's latest result stands
    Ok((FinalReply::Extracted(result_a), counter))
}

/// Scripted replies for driving an external debate (and the matching
/// single-call run) from a sequential scripted backend in tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DebateScript {
    pub reason: [String; 2],
    /// Per round: argue, critique, rebut and adjust texts for both agents.
    pub rounds: Vec<DebateRound>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DebateRound {
    pub argue: [String; 2],
    pub critique: [String; 2],
    pub rebut: [String; 2],
    pub adjust: [String; 2],
}

impl DebateScript {
    /// Agents disagree until round `agree_at` (1-based), where both settle on
    /// `answer`. `agree_at = None` never agrees. `rounds` entries are scripted.
    pub fn converging_at(agree_at: Option<u32>, rounds: u32, answer: &str) -> Self {
        let reason = [
            "I reason it through.\nAnswer: 1".to_string(),
            "Independently, I reason it through.\nAnswer: 2".to_string(),
        ];
        let rounds = (1..=rounds)
            .map(|r| {
                let agreed = agree_at.is_some_and(|a| r >= a);
                let adjust = if agreed {
                    [format!("Answer: {answer}"), format!("Answer: {answer}")]
                } else {
                    [format!("Still mine.\nAnswer: {}", 100 + r), format!("Still mine.\nAnswer: {}", 200 + r)]
                };
                DebateRound {
                    argue: [
                        format!("Round {r}: my result follows from the first step."),
                        format!("Round {r}: my result follows from the second step."),
                    ],
                    critique: [
                        format!("Round {r}: your second step skips a case."),
                        format!("Round {r}: your first step assumes too much."),
                    ],
                    rebut: [
                        format!("Round {r}: the case is covered implicitly."),
                        format!("Round {r}: the assumption is stated in the task."),
                    ],
                    adjust,
                }
            })
            .collect();
        Self { reason, rounds }
    }

    /// Replies in external-debate call order.
    pub fn to_script(&self) -> Vec<String> {
        let mut out = self.reason.to_vec();
        for r in &self.rounds {
            for pair in [&r.argue, &r.critique, &r.rebut, &r.adjust] {
                out.extend(pair.iter().cloned());
            }
        }
        out
    }

    /// The reply a single-call run would give: just the final result.
    pub fn final_reply(&self, answer: &str) -> String {
        format!("Answer: {answer}")
    }
}
