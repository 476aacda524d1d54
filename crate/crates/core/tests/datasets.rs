mod common;

use std::collections::HashSet;

use common::{arb_task, fixture};
use inot_core::datasets::{
    load_dataset, load_with, select_math_subset, split_tasks, write_jsonl, Adapter, DatasetError, LoadMode,
    LoadOptions, SplitSpec,
};
use inot_core::task::{Gold, TaskKind};
use proptest::prelude::*;

fn load(adapter: &str, file: &str) -> Vec<inot_core::TaskInstance> {
    load_dataset(&fixture(&format!("datasets/{file}")), adapter).unwrap()
}

#[test]
fn gsm8k_gold_after_marker() {
    let tasks = load("gsm8k", "gsm8k.jsonl");
    assert_eq!(tasks.len(), 3);
    assert_eq!(tasks[0].kind, TaskKind::Math);
    assert_eq!(tasks[0].gold, Gold::Answers { answers: vec!["72".into()] });
    assert_eq!(tasks[1].gold, Gold::Answers { answers: vec!["10".into()] });
}

#[test]
fn humaneval_statement_and_suite() {
    let tasks = load("humaneval", "humaneval.jsonl");
    let t = &tasks[0];
    assert_eq!(t.id, "HumanEval/0");
    assert_eq!(t.kind, TaskKind::Code);
    assert!(t.statement.starts_with("def add(a: int, b: int) -> int:\n    \"\"\"Return the sum"));
    let Gold::Tests { suite } = &t.gold else { panic!("code gold") };
    assert!(suite.setup.starts_with("def check(candidate):"));
    assert_eq!(suite.cases[0].code, "check(add)");
}

#[test]
fn mbpp_cases_per_assert() {
    let t = &load("mbpp", "mbpp.jsonl")[0];
    assert_eq!(t.id, "mbpp/11");
    let Gold::Tests { suite } = &t.gold else { panic!("code gold") };
    assert_eq!(suite.cases.len(), 2);
    assert!(t.statement.contains("assert remove_Occ(\"hello\",\"l\") == \"heo\""));
}

#[test]
fn hotpot_and_squad() {
    let h = load("hotpotqa", "hotpotqa.json");
    assert_eq!(h.len(), 2);
    assert_eq!(h[0].gold, Gold::Answers { answers: vec!["yes".into()] });
    let ctx = h[0].context.as_deref().unwrap();
    assert!(ctx.starts_with("Scott Derrickson: Scott Derrickson is an American director. He lives"));
    assert_eq!(h[1].metadata["type"], "bridge");

    let s = load("squad", "squad.json");
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].gold, Gold::Answers { answers: vec!["France".into()] });
    assert_eq!(
        s[1].gold,
        Gold::Answers {
            answers: vec!["10th and 11th centuries".into(), "in the 10th and 11th centuries".into()]
        }
    );
    assert!(s[0].context.as_deref().unwrap().contains("Normandy"));
}

#[test]
fn math_metadata_and_boxed_gold() {
    let m = load("math", "math.jsonl");
    assert_eq!(m[0].metadata["level"], "4");
    assert_eq!(m[0].metadata["category"], "Combinatorics & Probability");
    assert_eq!(m[1].gold, Gold::Answers { answers: vec!["\\frac{7}{12}".into()] });
    assert_eq!(m[2].metadata["category"], "Pre-calculus");
    let subset = select_math_subset(&m, 3).unwrap();
    let ids: Vec<_> = subset.iter().map(|t| t.id.as_str()).collect();
    assert_eq!(ids, [m[0].id.as_str(), m[2].id.as_str()]);
}

#[test]
fn image_adapters_resolve_paths_and_filter() {
    let path = fixture("datasets/scienceqa_img.json");
    let report = load_with(&path, Adapter::ScienceQaImg, &LoadOptions::default()).unwrap();
    assert_eq!(report.tasks.len(), 1);
    assert_eq!(report.filtered.len(), 1);
    assert_eq!(report.filtered[0].location, "record 2");
    let t = &report.tasks[0];
    assert_eq!(t.gold, Gold::Choice { answer: "B".into(), choices: vec!["black".into(), "red".into()] });
    assert!(t.images[0].path.is_file());
    assert_eq!(t.context.as_deref(), Some("Look at the figure."));

    let l = load("llava_bench_coco", "llava_bench_coco.jsonl");
    assert_eq!(l[0].id, "llava_bench_coco-0");
    assert!(l[0].images[0].path.is_file());
}

#[test]
fn empty_file_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.jsonl");
    std::fs::write(&p, "").unwrap();
    for a in Adapter::ALL {
        assert!(load_with(&p, a, &LoadOptions::default()).unwrap().tasks.is_empty());
    }
}

#[test]
fn strict_and_lenient_modes() {
    let p = fixture("datasets/gsm8k_malformed.jsonl");
    match load_dataset(&p, "gsm8k") {
        Err(DatasetError::Schema { location, .. }) => assert_eq!(location, "line 2"),
        other => panic!("expected schema error, got {other:?}"),
    }
    let lenient = LoadOptions {
        mode: LoadMode::Lenient,
        root: None,
    };
    let r = load_with(&p, Adapter::Gsm8k, &lenient).unwrap();
    assert_eq!(r.tasks.len(), 2);
    let locations: Vec<_> = r.skipped.iter().map(|s| s.location.as_str()).collect();
    assert_eq!(locations, ["line 2", "line 3"]);
    assert!(matches!(load_dataset(&p, "nope"), Err(DatasetError::UnknownAdapter(_))));
}

#[test]
fn adapter_totality_on_fixtures() {
    let cases = [
        ("hotpotqa", "hotpotqa.json", 2),
        ("squad", "squad.json", 2),
        ("humaneval", "humaneval.jsonl", 2),
        ("mbpp", "mbpp.jsonl", 1),
        ("gsm8k", "gsm8k.jsonl", 3),
        ("math", "math.jsonl", 3),
        ("scienceqa_img", "scienceqa_img.json", 2),
        ("llava_bench_coco", "llava_bench_coco.jsonl", 1),
    ];
    for (adapter, file, records) in cases {
        let r = load_with(&fixture(&format!("datasets/{file}")), adapter.parse().unwrap(), &LoadOptions::default())
            .unwrap();
        assert_eq!(r.tasks.len() + r.filtered.len() + r.skipped.len(), records, "{adapter}");
        assert!(r.skipped.is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn internal_jsonl_round_trip(tasks in proptest::collection::vec(arb_task(), 0..12)) {
        let mut seen = HashSet::new();
        let tasks: Vec<_> = tasks.into_iter().filter(|t| seen.insert(t.id.clone())).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tasks.jsonl");
        write_jsonl(&tasks, &p).unwrap();
        prop_assert_eq!(load_dataset(&p, "internal").unwrap(), tasks);
    }

    #[test]
    fn split_partitions_loaded_tasks(seed in any::<u64>()) {
        let tasks = load("gsm8k", "gsm8k.jsonl");
        let (v, t) = split_tasks(&tasks, SplitSpec::new(seed));
        prop_assert_eq!(v.len(), 1);
        prop_assert_eq!(t.len(), 2);
    }
}
