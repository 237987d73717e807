use tracecheck::graphs::bundled_catalog;
use tracecheck::mock::{generate_trace, inject, FaultKind, FaultSpec, MockError, SimConfig, Trigger};
use tracecheck::replay::{replay_trace, replay_trace_with, EntryKind, Severity, Status};
use tracecheck::trace::{map_snapshot, parse_trace, serialize_trace};

#[test]
fn fault_free_runs_replay_clean() {
    let cat = bundled_catalog();
    for seed in 0..40 {
        let g = generate_trace(&SimConfig::new(seed, 400)).unwrap();
        let r = replay_trace(&g.trace, &cat).unwrap();
        assert_eq!(r.status, Status::Success, "seed {seed}");
        assert!(r.journal.is_empty(), "seed {seed}: {:#?}", r.journal);
    }
}

#[test]
fn model_and_kernel_agree_call_by_call() {
    let cat = bundled_catalog();
    let g = generate_trace(&SimConfig::new(7, 1000)).unwrap();
    let mut granted = 0;
    let mut denied = 0;
    replay_trace_with(&g.trace, &cat, &mut |step| {
        assert_eq!(step.model_granted, Some(step.real_granted), "seq {}", step.record.seq);
        if step.real_granted {
            granted += 1;
        } else {
            denied += 1;
        }
    })
    .unwrap();
    assert!(granted > 50 && denied > 50, "{granted} granted, {denied} denied");
}

#[test]
fn generation_is_deterministic_and_parses_back() {
    let cfg = SimConfig::new(42, 300);
    let a = generate_trace(&cfg).unwrap();
    let b = generate_trace(&cfg).unwrap();
    assert_eq!(a, b);
    let text = serialize_trace(&a.trace);
    assert_eq!(parse_trace(&text).unwrap(), a.trace);
    assert!(map_snapshot(&a.trace.snapshot).is_ok());
    assert!(map_snapshot(a.trace.final_snapshot.as_ref().unwrap()).is_ok());
    assert_ne!(generate_trace(&SimConfig::new(43, 300)).unwrap(), a);
}

#[test]
fn wrong_grant_is_critical_at_the_injected_call() {
    let cat = bundled_catalog();
    let cfg = SimConfig::new(3, 500);
    let g = inject(
        &cfg,
        FaultSpec {
            kind: FaultKind::WrongGrant,
            trigger: Trigger::default(),
        },
    )
    .unwrap();
    let seq = g.seq_of(0).unwrap();
    let r = replay_trace(&g.trace, &cat).unwrap();
    assert_eq!(r.status, Status::Failure);
    assert_eq!(r.calls_processed, seq);
    let crit: Vec<_> = r.journal.iter().filter(|e| e.severity == Severity::Crit).collect();
    assert_eq!(crit.len(), 1);
    assert_eq!(crit[0].seq, seq);
    assert_eq!(crit[0].kind, EntryKind::DeniedButGranted);
}

#[test]
fn wrong_deny_and_exhaustion_are_triaged() {
    let cat = bundled_catalog();
    let cfg = SimConfig::new(5, 300);
    for (errno, severity) in [(13, Some(Severity::Crit)), (1, Some(Severity::Crit)), (22, Some(Severity::Warn)), (12, None)] {
        let g = inject(
            &cfg,
            FaultSpec {
                kind: FaultKind::WrongDeny { errno },
                trigger: Trigger::on("open"),
            },
        )
        .unwrap();
        let seq = g.seq_of(0).unwrap();
        let r = replay_trace(&g.trace, &cat).unwrap();
        let at: Vec<_> = r.journal.iter().filter(|e| e.seq == seq).collect();
        assert_eq!(at.first().map(|e| e.severity), severity, "errno {errno}");
        assert!(at.iter().all(|e| e.kind == EntryKind::GrantedButDenied));
    }
    let g = inject(
        &cfg,
        FaultSpec {
            kind: FaultKind::ResourceExhaustion,
            trigger: Trigger::at(10),
        },
    )
    .unwrap();
    assert_eq!(g.seq_of(0), Some(10));
    let r = replay_trace(&g.trace, &cat).unwrap();
    assert!(r.journal.iter().all(|e| e.seq != 10));
}

#[test]
fn fault_that_cannot_fire_is_reported() {
    let cfg = SimConfig::new(1, 0);
    let f = FaultSpec {
        kind: FaultKind::MissingHook,
        trigger: Trigger::default(),
    };
    assert_eq!(inject(&cfg, f.clone()), Err(MockError::FaultNeverTriggers(f)));
}
