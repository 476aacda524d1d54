mod common;

use common::{check_prompt_goldens, fixture};
use inot_core::datasets::load_dataset;
use inot_core::harness::validate_goldens;
use inot_core::prompt::validate_xml_balance;
use inot_core::{render_inot_prompt, InotVariant};

fn text_task() -> inot_core::TaskInstance {
    load_dataset(&fixture("goldens/text_task.task.jsonl"), "internal").unwrap().remove(0)
}

#[test]
fn goldens_match_byte_for_byte() {
    assert_eq!(check_prompt_goldens().unwrap(), 6);
    let checks = validate_goldens(&fixture("goldens"), false).unwrap();
    assert_eq!(checks.len(), 6);
    assert!(checks.iter().all(|c| c.ok()));
}

#[test]
fn listing_lines_are_verbatim() {
    let p = render_inot_prompt(&text_task(), InotVariant::Full, 10).unwrap().rendered;
    for line in [
        "RoleName: PromptCode Executor",
        "PromptCode is a structured reasoning code",
        "<Reasoning Logic>: The most important part,",
        "Agent_A/B = DebateAgent(task)",
        "MaxRounds=10,Counter=0,agreement=False",
        "While not agreement or Counter < MaxRounds:",
        "critique_A = Agent_A.critique(argument_B)",
        "agreement = (result_A == result_B)",
        "Output final_result without explanation.",
    ] {
        assert!(p.lines().any(|l| l == line), "missing line {line:?}");
    }
    assert_eq!(
        render_inot_prompt(&text_task(), InotVariant::Full, 10).unwrap().tags(),
        ["Role", "PromptCode", "Rule", "ReasoningLogic", "Task"]
    );
}

#[test]
fn ablation_removes_prompt_code_only() {
    let full = render_inot_prompt(&text_task(), InotVariant::Full, 10).unwrap();
    let ablated = render_inot_prompt(&text_task(), InotVariant::NoPromptCodeDefinition, 10).unwrap();
    assert_eq!(ablated.tags(), ["Role", "Rule", "ReasoningLogic", "Task"]);
    assert!(!ablated.rendered.contains("<PromptCode>"));
    assert_ne!(full.digest, ablated.digest);
}

#[test]
fn round_budget_is_substituted() {
    for rounds in [1, 3, 10, 25] {
        let p = render_inot_prompt(&text_task(), InotVariant::Full, rounds).unwrap();
        assert!(p.rendered.contains(&format!("MaxRounds={rounds},Counter=0")));
        assert!(!p.rendered.contains("{max_rounds}"));
        assert!(validate_xml_balance(&p.rendered).is_empty());
    }
    assert!(render_inot_prompt(&text_task(), InotVariant::Full, 0).is_err());
}

#[test]
fn blessing_rewrites_only_stale_goldens() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["text_task.task.jsonl"] {
        std::fs::copy(fixture(&format!("goldens/{f}")), dir.path().join(f)).unwrap();
    }
    let first = validate_goldens(dir.path(), false).unwrap();
    assert!(first.iter().all(|c| !c.ok()));
    validate_goldens(dir.path(), true).unwrap();
    assert!(validate_goldens(dir.path(), false).unwrap().iter().all(|c| c.ok()));
    assert_eq!(
        std::fs::read(dir.path().join("text_task.full.txt")).unwrap(),
        std::fs::read(fixture("goldens/text_task.full.txt")).unwrap()
    );
}
