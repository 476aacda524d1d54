#![allow(dead_code)]

use std::path::PathBuf;

use inot_core::task::{Gold, TaskInstance, TaskKind, TestCase, TestSuite};
use proptest::prelude::*;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn python_available() -> bool {
    std::process::Command::new("python3")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9 ,.?]{0,60}"
}

/// Random text-only tasks of every kind that needs no image file.
pub fn arb_task() -> impl Strategy<Value = TaskInstance> {
    let kind = prop_oneof![Just(TaskKind::Qa), Just(TaskKind::Math), Just(TaskKind::Code)];
    (
        "[a-z]{1,8}-[0-9]{1,4}",
        kind,
        text(),
        proptest::option::of(text()),
        proptest::collection::vec("[a-z0-9 ]{1,12}", 1..3),
        proptest::collection::btree_map("[a-z]{1,6}", "[a-z0-9]{0,6}", 0..3),
    )
        .prop_map(|(id, kind, statement, context, answers, metadata)| {
            let gold = match kind {
                TaskKind::Code => Gold::Tests {
                    suite: TestSuite {
                        setup: String::new(),
                        cases: vec![TestCase {
                            name: "t0".into(),
                            code: "assert f() == 1".into(),
                        }],
                    },
                },
                TaskKind::Math => Gold::Answers {
                    answers: answers[..1].to_vec(),
                },
                _ => Gold::Answers { answers },
            };
            let mut t = TaskInstance::new(id, kind, statement, gold);
            t.context = context;
            t.metadata = metadata;
            t
        })
}

pub fn sandbox_suite() -> TestSuite {
    serde_json::from_str(&std::fs::read_to_string(fixture("sandbox/suite.json")).unwrap()).unwrap()
}

/// Runs a sandbox fixture candidate against the fixture suite.
pub fn run_sandbox_fixture(name: &str, time_limit_ms: u64) -> inot_core::eval::CodeRunResult {
    let candidate = std::fs::read_to_string(fixture(&format!("sandbox/{name}.py"))).unwrap();
    inot_core::eval::Sandbox::default()
        .run_code_tests(&candidate, &sandbox_suite(), time_limit_ms)
        .unwrap()
}

pub fn debate_task() -> TaskInstance {
    TaskInstance::new(
        "debate-1",
        TaskKind::Math,
        "A train travels 60 km in 1.5 hours. What is its average speed in km/h?",
        Gold::Answers {
            answers: vec!["40".into()],
        },
    )
}

/// Runs ExternalDebate on a script that agrees at `agree_at` (None: never).
pub fn run_scripted_debate(
    agree_at: Option<u32>,
    max_rounds: u32,
) -> (inot_core::StrategyOutcome, usize) {
    use inot_core::backend::ScriptedBackend;
    use inot_core::strategies::DebateScript;
    let script = DebateScript::converging_at(agree_at, max_rounds, "40");
    let backend = ScriptedBackend::new(script.to_script());
    let kind = inot_core::StrategyKind::ExternalDebate { max_rounds };
    let out = inot_core::run_strategy(&kind, &debate_task(), &backend, &inot_core::RunSettings::new("scripted", 0.0))
        .unwrap();
    (out, backend.calls())
}

/// Total tokens of INoT and of a 3-round ExternalDebate on the same task.
pub fn inot_and_debate_tokens() -> (u64, u64) {
    use inot_core::backend::ScriptedBackend;
    use inot_core::strategies::DebateScript;
    let script = DebateScript::converging_at(Some(3), 10, "40");
    let backend = ScriptedBackend::new([script.final_reply("40")]);
    let inot = inot_core::run_strategy(
        &inot_core::StrategyKind::inot(),
        &debate_task(),
        &backend,
        &inot_core::RunSettings::new("scripted", 0.0),
    )
    .unwrap();
    let (debate, _) = run_scripted_debate(Some(3), 10);
    assert_eq!(inot.final_answer, debate.final_answer);
    (inot.total_tokens(), debate.total_tokens())
}

/// Temp copy of the harness fixture (config, tasks, rules); returns the config path.
pub fn harness_workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    for f in ["config.toml", "tasks.jsonl", "rules.jsonl"] {
        std::fs::copy(fixture(&format!("harness/{f}")), dir.path().join(f)).unwrap();
    }
    let config = dir.path().join("config.toml");
    (dir, config)
}

/// Report files of a run directory by name.
pub fn report_bytes(run_dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(run_dir.join("reports"))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

pub fn count_files(dir: &std::path::Path) -> usize {
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        n += if p.is_dir() { count_files(&p) } else { 1 };
    }
    n
}

/// Renders both golden fixture tasks under the three variants at 10 rounds
/// and checks bytes, the round budget, and Image Augment placement.
pub fn check_prompt_goldens() -> Result<usize, String> {
    use inot_core::harness::{golden_path, GOLDEN_VARIANTS};
    use inot_core::prompt::validate_xml_balance;
    use inot_core::{render_inot_prompt, InotVariant};
    let dir = fixture("goldens");
    let mut checked = 0;
    for stem in ["text_task", "image_task"] {
        let task = inot_core::datasets::load_dataset(&dir.join(format!("{stem}.task.jsonl")), "internal")
            .map_err(|e| e.to_string())?
            .remove(0);
        for variant in GOLDEN_VARIANTS {
            let p = render_inot_prompt(&task, variant, 10).map_err(|e| e.to_string())?;
            let golden = std::fs::read_to_string(golden_path(&dir, stem, variant)).map_err(|e| e.to_string())?;
            if p.rendered != golden {
                return Err(format!("{stem}/{}: rendered prompt differs from golden", variant.as_str()));
            }
            if !golden.contains("MaxRounds=10,") {
                return Err(format!("{stem}/{}: MaxRounds=10 missing", variant.as_str()));
            }
            let has_module = golden.contains("\n<Image Augment>\n");
            let expect = !task.images.is_empty() && variant != InotVariant::NoImageAugment;
            if has_module != expect || p.includes_image_augment != expect {
                return Err(format!("{stem}/{}: Image Augment presence {has_module}, expected {expect}", variant.as_str()));
            }
            let violations = validate_xml_balance(&golden);
            if !violations.is_empty() {
                return Err(format!("{stem}/{}: unbalanced sections {violations:?}", variant.as_str()));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
