//! Acceptance gate: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tracecheck::cli;
use tracecheck::graphs::{bounded_cases, bundled_catalog, replay_syscall, validate_graph, OpenFlags, OpenMode, SyscallParams, Verdict};
use tracecheck::mock::{generate_trace, inject, FaultKind, FaultSpec, MockError, SimConfig, Trigger, Universe};
use tracecheck::policy::universe::Bounds;
use tracecheck::policy::{derive_flows, PolicyState, SubjectId};
use tracecheck::replay::{check_err_code, replay_trace, replay_trace_with, EntryKind, Severity, Status};
use tracecheck::trace::{map_snapshot, parse_trace, serialize_trace, SyscallRecord, SyscallResult, Trace};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn traces_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("traces")
}

fn golden(name: &str) -> Trace {
    parse_trace(&std::fs::read_to_string(traces_dir().join(name)).unwrap()).unwrap()
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg.into()) }
}

const OPEN_PATH: [&str; 8] = [
    "open_start", "open_check_p", "open_write_p", "open_create",
    "open_grant", "open_check", "open_write", "open_finish",
];

fn open_create_params() -> SyscallParams {
    SyscallParams::new(SubjectId(42))
        .with_path("/d/f")
        .with_flags(OpenFlags::new(OpenMode::WriteOnly, true, false))
}

fn criterion_1() -> Outcome {
    let cat = bundled_catalog();
    let graph = cat.get("open").unwrap();
    let (st, _) = map_snapshot(&golden("open_create.jsonl").snapshot).unwrap();
    let p = open_create_params();
    let mut times = Vec::new();
    let mut last = None;
    for _ in 0..101 {
        let t = Instant::now();
        let out = replay_syscall(&st, graph, &p).unwrap();
        times.push(t.elapsed());
        last = Some(out);
    }
    times.sort();
    let out = last.unwrap();
    ensure(out.verdict == Verdict::Granted, format!("verdict {:?}", out.verdict))?;
    ensure(out.path == OPEN_PATH, format!("path {:?}", out.path))?;
    let median = times[times.len() / 2];
    ensure(median < Duration::from_millis(1), format!("median {median:?}"))?;
    Ok(format!("8-node path, median {median:?}, max {:?}", times.last().unwrap()))
}

fn call(seq: u64, name: &str, args: Value, code: i64, aux: Value) -> SyscallRecord {
    let map = |v: Value| -> BTreeMap<String, Value> { serde_json::from_value(v).unwrap() };
    let mut result = SyscallResult::ok(code);
    if name == "open" && code >= 0 {
        result.outputs.insert("fd".into(), json!(code));
    }
    SyscallRecord { seq, name: name.into(), pid: 42, args: map(args), result, aux: map(aux) }
}

fn creat_args() -> Value {
    json!({"pathname": "/d/f", "flags": ["O_WRONLY", "O_CREAT"]})
}

fn missing_args() -> Value {
    json!({"pathname": "/d/missing", "flags": ["O_RDONLY"]})
}

/// Trace with `calls` and the initial snapshot as its final snapshot.
fn unchanged(base: &Trace, calls: Vec<SyscallRecord>) -> Trace {
    Trace { snapshot: base.snapshot.clone(), calls, final_snapshot: Some(base.snapshot.clone()) }
}

/// Checks that a kernel denial the model would have granted leaves the model
/// where it was before the call: the state seen by the next call (or the
/// final state) equals the pre-call state.
struct RevertCheck {
    pending: Option<(u64, PolicyState)>,
    checked: usize,
    mismatches: Vec<u64>,
}

impl RevertCheck {
    fn new() -> Self {
        RevertCheck { pending: None, checked: 0, mismatches: Vec::new() }
    }

    fn settle(&mut self, now: &PolicyState) {
        if let Some((seq, before)) = self.pending.take() {
            self.checked += 1;
            if &before != now {
                self.mismatches.push(seq);
            }
        }
    }

    fn step(&mut self, step: &tracecheck::replay::Step) {
        self.settle(step.before);
        if step.model_granted == Some(true) && !step.real_granted {
            self.pending = Some((step.record.seq, step.before.clone()));
        }
    }
}

fn criterion_2() -> Outcome {
    let cat = bundled_catalog();
    let base = golden("open_create.jsonl");

    // G/G: the golden trace, final snapshot included.
    let r = replay_trace(&base, &cat).unwrap();
    ensure(r.status == Status::Success && r.journal.is_empty(), format!("G/G: {:?}", r.journal))?;

    // D/D: both sides refuse to open a missing file.
    let dd = unchanged(&base, vec![call(1, "open", missing_args(), -2, json!({}))]);
    let r = replay_trace(&dd, &cat).unwrap();
    ensure(r.status == Status::Success && r.journal.is_empty(), format!("D/D: {:?}", r.journal))?;

    // Model denies, kernel grants: the role lacks write on /d, the kernel creates anyway.
    let mut snap = base.snapshot.clone();
    snap.roles[0].rights.retain(|a| !(a.inode == 3 && a.access == tracecheck::policy::AccessKind::WriteA));
    let dg = Trace {
        snapshot: snap.clone(),
        calls: vec![
            call(1, "open", missing_args(), -2, json!({})),
            call(2, "open", creat_args(), 1, json!({"inode": 4})),
            call(3, "close", json!({"fd": 1}), 0, json!({})),
        ],
        final_snapshot: None,
    };
    let r = replay_trace(&dg, &cat).unwrap();
    ensure(r.status == Status::Failure, "D/G: status")?;
    ensure(r.journal.len() == 1, format!("D/G: {} entries", r.journal.len()))?;
    let e = &r.journal[0];
    ensure(
        e.severity == Severity::Crit && e.seq == 2 && e.kind == EntryKind::DeniedButGranted && r.calls_processed == 2,
        format!("D/G: {e}, stopped at {}", r.calls_processed),
    )?;

    // Model grants, kernel denies: the model would create, the kernel says EACCES. A
    // retry without O_CREAT must then see the file as absent.
    let mut revert = RevertCheck::new();
    let gd = unchanged(
        &base,
        vec![
            call(1, "open", creat_args(), -13, json!({})),
            call(2, "open", json!({"pathname": "/d/f", "flags": ["O_RDONLY"]}), -2, json!({})),
        ],
    );
    let r = replay_trace_with(&gd, &cat, &mut |s| revert.step(s)).unwrap();
    revert.settle(&r.state);
    ensure(r.status == Status::Success, "G/D: status")?;
    ensure(
        r.journal.len() == 1
            && r.journal[0].severity == Severity::Crit
            && r.journal[0].kind == EntryKind::GrantedButDenied
            && r.journal[0].seq == 1,
        format!("G/D: {:?}", r.journal),
    )?;
    ensure(revert.checked == 1 && revert.mismatches.is_empty(), "G/D: state not reverted")?;
    let (initial, _) = map_snapshot(&base.snapshot).unwrap();
    ensure(r.state == initial, "G/D: final model state differs from the snapshot")?;

    // Same call failing with ENOMEM is benign.
    let oom = unchanged(&base, vec![call(1, "open", creat_args(), -12, json!({}))]);
    let r = replay_trace(&oom, &cat).unwrap();
    ensure(r.status == Status::Success && r.journal.is_empty(), format!("G/D ENOMEM: {:?}", r.journal))?;
    Ok("G/G, D/D, D/G, G/D (EACCES and ENOMEM) as expected".into())
}

fn criterion_3() -> Outcome {
    let table = [
        (12, None),
        (22, Some(Severity::Warn)),
        (13, Some(Severity::Crit)),
        (1, Some(Severity::Crit)),
        (2, Some(Severity::Warn)),
        (9, Some(Severity::Warn)),
        (16, Some(Severity::Warn)),
        (17, Some(Severity::Warn)),
        (95, Some(Severity::Warn)),
    ];
    for (errno, want) in table {
        let rec = call(5, "open", creat_args(), -(errno as i64), json!({}));
        let got = check_err_code(&rec).unwrap().map(|e| e.severity);
        ensure(got == want, format!("errno {errno}: got {got:?}, expected {want:?}"))?;
    }
    ensure(check_err_code(&call(5, "open", creat_args(), 3, json!({}))).is_err(), "success accepted")?;
    Ok(format!("{} errno cases", table.len()))
}

const RUNS: u64 = 50;
const CALLS: usize = 1000;

/// Injects `kind` at a uniformly drawn seq, redrawing until the fault
/// changes that call's outcome.
fn inject_at_random(cfg: &SimConfig, kind: FaultKind, rng: &mut ChaCha8Rng) -> (u64, tracecheck::mock::Generated) {
    loop {
        let seq = rng.random_range(1..=cfg.n_calls as u64);
        match inject(cfg, FaultSpec { kind: kind.clone(), trigger: Trigger::at(seq) }) {
            Ok(g) => return (seq, g),
            Err(MockError::FaultNeverTriggers(_)) => continue,
            Err(e) => panic!("{e}"),
        }
    }
}

fn criterion_4() -> Outcome {
    let cat = bundled_catalog();
    let start = Instant::now();
    let mut detected = 0;
    let mut clean = 0;
    let mut failures = Vec::new();
    for seed in 1..=RUNS {
        let cfg = SimConfig::new(seed, CALLS);
        let free = generate_trace(&cfg).unwrap();
        let r = replay_trace(&free.trace, &cat).unwrap();
        if r.count(Severity::Crit) == 0 && r.count(Severity::Warn) == 0 {
            clean += 1;
        } else {
            failures.push(format!("seed {seed}: fault-free run journaled {:?}", r.journal));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9));
        let (seq, g) = inject_at_random(&cfg, FaultKind::WrongGrant, &mut rng);
        let r = replay_trace(&g.trace, &cat).unwrap();
        let first_crit = r.journal.iter().find(|e| e.severity == Severity::Crit).map(|e| e.seq);
        if r.status == Status::Failure && first_crit == Some(seq) && r.calls_processed == seq {
            detected += 1;
        } else {
            failures.push(format!("seed {seed}: injected at {seq}, first CRIT {first_crit:?}"));
        }
    }
    let elapsed = start.elapsed();
    ensure(failures.is_empty(), failures.join("; "))?;
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("{detected}/{RUNS} detected at the injected seq, {clean}/{RUNS} fault-free runs clean, {elapsed:.2?}"))
}

fn criterion_5() -> Outcome {
    let walk = common::random_walk(0, 10_000);
    ensure(walk.violations.is_empty(), format!("random walk: {:?}", walk.violations))?;
    let t = Instant::now();
    let ex = common::exhaustive_preservation(&Bounds::default());
    ensure(ex.violations.is_empty(), format!("bounded: {:?}", ex.violations))?;
    Ok(format!(
        "{} random enabled events, 0 violations; bounded: {} states, {} enabled events, 0 violations ({:.1?})",
        walk.enabled,
        ex.states,
        ex.enabled,
        t.elapsed()
    ))
}

fn criterion_6() -> Outcome {
    let cat = bundled_catalog();
    let mut total = 0;
    let mut defects = Vec::new();
    for g in cat.graphs() {
        let cases = bounded_cases(g, &Bounds::default());
        total += cases.len();
        defects.extend(validate_graph(g, cases.iter()).into_iter().map(|d| format!("{}: {d}", g.syscall)));
    }
    let nondet = defects.iter().filter(|d| d.contains("hold together")).count();
    ensure(nondet == 0, format!("{nondet} nondeterminism defects: {defects:?}"))?;
    ensure(defects.is_empty(), format!("other defects: {defects:?}"))?;
    Ok(format!("{} graphs, {total} bounded cases, 0 defects", cat.graphs().count()))
}

fn criterion_7() -> Outcome {
    // WrongGrant runs contain no call the model grants and the kernel
    // denies, so the same seeds are also run with faults that produce them.
    let cat = bundled_catalog();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for seed in 1..=RUNS {
        let cfg = SimConfig::new(seed, CALLS);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9));
        let runs = [
            inject_at_random(&cfg, FaultKind::WrongGrant, &mut rng).1,
            inject_at_random(&cfg, FaultKind::WrongDeny { errno: 13 }, &mut rng).1,
            inject_at_random(&cfg, FaultKind::ResourceExhaustion, &mut rng).1,
        ];
        for g in runs {
            let mut revert = RevertCheck::new();
            let r = replay_trace_with(&g.trace, &cat, &mut |s| revert.step(s)).unwrap();
            revert.settle(&r.state);
            checked += revert.checked;
            mismatches.extend(revert.mismatches.iter().map(|s| format!("seed {seed} seq {s}")));
            if r.status == Status::Success && r.journal.iter().any(|e| e.kind == EntryKind::FinalStateDivergence) {
                mismatches.push(format!("seed {seed}: final state diverges"));
            }
        }
    }
    ensure(checked >= RUNS as usize, format!("only {checked} calls checked"))?;
    ensure(mismatches.is_empty(), mismatches.join("; "))?;
    Ok(format!("{checked} granted-by-model/denied-by-kernel calls, all reverted exactly"))
}

fn criterion_8() -> Outcome {
    let suite: Vec<String> = (1..=4)
        .map(|i| traces_dir().join(format!("suite_{i}.jsonl")).display().to_string())
        .collect();
    let mut argv = vec!["tracecheck".to_owned(), "coverage".to_owned()];
    argv.extend(suite);
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(argv, &bundled_catalog(), &mut out, &mut err);
    let out = String::from_utf8(out).unwrap();
    let first = out.lines().next().unwrap_or_default().to_owned();
    ensure(code == cli::EXIT_OK, format!("exit {code}: {first}"))?;
    Ok(first)
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pairs = 0;
    for i in 0..1000 {
        let st = common::random_access_state(&mut rng, 10);
        let got = derive_flows(&st);
        let want = common::floyd_warshall_flows(&st);
        ensure(got == want, format!("state {i} differs"))?;
        pairs += want.len();
    }
    Ok(format!("1000 states agree, {pairs} flow pairs in total"))
}

fn random_config(rng: &mut ChaCha8Rng) -> SimConfig {
    let mut cfg = SimConfig::new(rng.random(), rng.random_range(0..300));
    cfg.universe = Universe {
        users: rng.random_range(1..=4),
        files: rng.random_range(0..=10),
        int_levels: rng.random_range(1..=3),
        sec_levels: rng.random_range(1..=3),
        categories: rng.random_range(0..=2),
    };
    if rng.random_bool(0.3) {
        cfg.faults.push(FaultSpec { kind: FaultKind::MissingHook, trigger: Trigger::default() });
    }
    cfg
}

fn criterion_10() -> Outcome {
    let mut golden = 0;
    for entry in std::fs::read_dir(traces_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            let text = std::fs::read_to_string(&path).unwrap();
            let t = parse_trace(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            ensure(serialize_trace(&t) == text, format!("{} is not reproduced", path.display()))?;
            golden += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..100 {
        let t = generate_trace(&random_config(&mut rng)).unwrap().trace;
        let text = serialize_trace(&t);
        let back = parse_trace(&text).map_err(|e| format!("generated {i}: {e}"))?;
        ensure(back == t && serialize_trace(&back) == text, format!("generated trace {i} differs"))?;
    }
    Ok(format!("{golden} golden traces and 100 generated traces round-trip"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("open() create path", criterion_1),
        ("divergence matrix", criterion_2),
        ("errno triage", criterion_3),
        ("fault detection", criterion_4),
        ("invariant preservation", criterion_5),
        ("graph determinism", criterion_6),
        ("revert exactness", criterion_7),
        ("guard conjunct coverage", criterion_8),
        ("flow closure oracle", criterion_9),
        ("format round-trip", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
