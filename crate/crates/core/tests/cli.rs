use std::path::{Path, PathBuf};

use tracecheck::cli::{run, EXIT_FAILURE, EXIT_INPUT, EXIT_NOTES, EXIT_OK};
use tracecheck::graphs::{bundled_catalog, ArgSpec, ArgType, EventNode, GraphCatalog, SyscallGraph};
use tracecheck::replay::{parse_journal, CoverageReport, Severity};

fn traces() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("traces")
}

fn tracecheck(args: &[&str], catalog: &GraphCatalog) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("tracecheck").chain(args.iter().copied());
    let code = run(argv, catalog, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn trace(name: &str) -> String {
    traces().join(name).to_str().unwrap().to_owned()
}

#[test]
fn replay_exit_codes() {
    let cat = bundled_catalog();
    assert_eq!(tracecheck(&["replay", &trace("open_create.jsonl")], &cat).0, EXIT_OK);
    assert_eq!(tracecheck(&["replay", &trace("suite_1.jsonl")], &cat).0, EXIT_OK);
    assert_eq!(tracecheck(&["replay", &trace("unmodeled.jsonl")], &cat).0, EXIT_NOTES);
    assert_eq!(
        tracecheck(&["replay", "--strict", &trace("unmodeled.jsonl")], &cat).0,
        EXIT_FAILURE
    );
    let (code, _, err) = tracecheck(&["replay", "/nonexistent/trace.jsonl"], &cat);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("/nonexistent/trace.jsonl"));
    assert_eq!(tracecheck(&["replay"], &cat).0, EXIT_INPUT);
    assert_eq!(tracecheck(&["frobnicate"], &cat).0, EXIT_INPUT);
}

#[test]
fn wrong_grant_replay_writes_one_critical_entry() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.jsonl");
    let coverage = dir.path().join("coverage.json");
    let (code, out, _) = tracecheck(
        &[
            "replay",
            &trace("wrong_grant.jsonl"),
            "--journal",
            journal.to_str().unwrap(),
            "--coverage",
            coverage.to_str().unwrap(),
        ],
        &bundled_catalog(),
    );
    assert_eq!(code, EXIT_FAILURE);
    let entries = parse_journal(&std::fs::read_to_string(&journal).unwrap()).unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].severity, Severity::Crit);
    assert_eq!(out.lines().count(), 2);
    let report = CoverageReport::from_json(&std::fs::read_to_string(&coverage).unwrap()).unwrap();
    assert!(report.node_fraction() > 0.0);
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = traces().join("configs/suite_1.json");
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let cat = bundled_catalog();
    for p in [&a, &b] {
        let (code, ..) = tracecheck(&["generate", cfg.to_str().unwrap(), p.to_str().unwrap()], &cat);
        assert_eq!(code, EXIT_OK);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text, std::fs::read_to_string(trace("suite_1.jsonl")).unwrap());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"seed":1,"n_calls":5,"weights":{"fork":1}}"#).unwrap();
    let (code, _, err) = tracecheck(&["generate", bad.to_str().unwrap(), a.to_str().unwrap()], &cat);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("fork"));
}

fn defective_catalog() -> GraphCatalog {
    // Both arcs out of `start` hold whenever the descriptor is open.
    let g = SyscallGraph::new("dup", vec![ArgSpec { name: "fd", ty: ArgType::Fd }])
        .node(
            EventNode::initial("start")
                .arc("left", |_, _| true, "a")
                .arc("right", |_, p| p.fd == Some(1), "b"),
        )
        .node(EventNode::inner("a").then("end"))
        .node(EventNode::inner("b").then("end"))
        .node(EventNode::last("end"));
    GraphCatalog::new(bundled_catalog().graphs().cloned().chain([g]))
}

#[test]
fn validate_graph_exit_codes() {
    let cat = defective_catalog();
    let (code, out, _) = tracecheck(&["validate-graph", "close"], &cat);
    assert_eq!(code, EXIT_OK, "{out}");
    let (code, out, _) = tracecheck(&["validate-graph", "dup"], &cat);
    assert_eq!(code, EXIT_FAILURE);
    assert!(out.contains("left->a, right->b"), "{out}");
    assert_eq!(tracecheck(&["validate-graph", "fork"], &cat).0, EXIT_INPUT);
    let (code, out, _) = tracecheck(&["validate-graph", "open", "--dot"], &cat);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("digraph \"open\""));
}

#[test]
fn coverage_command() {
    let cat = bundled_catalog();
    let suite: Vec<String> = (1..=4).map(|i| trace(&format!("suite_{i}.jsonl"))).collect();
    let mut args = vec!["coverage"];
    args.extend(suite.iter().map(String::as_str));
    let (code, out, _) = tracecheck(&args, &cat);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.starts_with("guard conjuncts: 0.8"), "{out}");
    args.extend(["--min", "0.99"]);
    assert_eq!(tracecheck(&args, &cat).0, EXIT_FAILURE);
    assert_eq!(tracecheck(&["coverage"], &cat).0, EXIT_INPUT);
}
