use proptest::prelude::*;
use tracecheck::graphs::bundled_catalog;
use tracecheck::mock::{generate_trace, inject, FaultKind, FaultSpec, SimConfig, Trigger};
use tracecheck::replay::{
    journal_to_jsonl, parse_journal, replay_trace, CoverageReport, ReplayError, Severity,
};

fn coverage_of(seed: u64, n: usize) -> CoverageReport {
    let t = generate_trace(&SimConfig::new(seed, n)).unwrap().trace;
    replay_trace(&t, &bundled_catalog()).unwrap().coverage
}

#[test]
fn journal_survives_jsonl() {
    let cat = bundled_catalog();
    let mut entries = Vec::new();
    for (seed, kind) in [
        (1, FaultKind::WrongDeny { errno: 22 }),
        (2, FaultKind::WrongDeny { errno: 1 }),
        (3, FaultKind::MissingHook),
    ] {
        let g = inject(&SimConfig::new(seed, 300), FaultSpec { kind, trigger: Trigger::default() }).unwrap();
        entries.extend(replay_trace(&g.trace, &cat).unwrap().journal);
    }
    assert!(entries.iter().any(|e| e.severity == Severity::Warn));
    assert!(entries.iter().any(|e| e.severity == Severity::Crit));
    assert_eq!(parse_journal(&journal_to_jsonl(&entries)).unwrap(), entries);
}

#[test]
fn missing_hook_is_caught_like_a_wrong_grant() {
    let g = inject(
        &SimConfig::new(21, 500),
        FaultSpec { kind: FaultKind::MissingHook, trigger: Trigger::on("unlink") },
    )
    .unwrap();
    let seq = g.seq_of(0).unwrap();
    let r = replay_trace(&g.trace, &bundled_catalog()).unwrap();
    assert_eq!(r.calls_processed, seq);
    assert_eq!(r.journal.last().unwrap().seq, seq);
}

#[test]
fn unknown_pid_is_an_error() {
    let mut t = generate_trace(&SimConfig::new(4, 20)).unwrap().trace;
    t.calls[3].pid = 9999;
    assert!(matches!(
        replay_trace(&t, &bundled_catalog()),
        Err(ReplayError::Call { seq: 4, .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn coverage_merge_is_a_commutative_union(a in 0u64..1000, b in 0u64..1000) {
        let (ca, cb) = (coverage_of(a, 150), coverage_of(b, 150));
        let mut ab = ca.clone();
        ab.merge(&cb);
        let mut ba = cb.clone();
        ba.merge(&ca);
        prop_assert_eq!(&ab, &ba);
        prop_assert!(ab.conjunct_fraction() >= ca.conjunct_fraction().max(cb.conjunct_fraction()));
        for (name, counts) in &ab.guard_conjuncts {
            let x = &ca.guard_conjuncts[name];
            let y = &cb.guard_conjuncts[name];
            prop_assert_eq!(counts.held, x.held + y.held);
            prop_assert_eq!(counts.failed, x.failed + y.failed);
        }
        prop_assert_eq!(CoverageReport::from_json(&ab.to_json()).unwrap(), ab);
    }
}
