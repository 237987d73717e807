use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::graphs::errno::ENOMEM;
use crate::trace::{SyscallRecord, SyscallResult, Trace};

use super::config::{FaultKind, FaultSpec, SimConfig};
use super::kernel::{Call, Done, SimKernel};
use super::workload::{initial_kernel, Workload};
use super::MockError;

/// Where a configured fault took effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Injection {
    /// Index into the config's fault list.
    pub fault: usize,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub trace: Trace,
    pub injections: Vec<Injection>,
}

impl Generated {
    pub fn seq_of(&self, fault: usize) -> Option<u64> {
        self.injections.iter().find(|i| i.fault == fault).map(|i| i.seq)
    }
}

fn args_of(call: &Call) -> BTreeMap<String, Value> {
    let pairs: Vec<(&str, Value)> = match call {
        Call::Open { path, read, write, creat, trunc } => {
            let mut flags = vec![match (read, write) {
                (true, true) => "O_RDWR",
                (false, true) => "O_WRONLY",
                _ => "O_RDONLY",
            }];
            if *creat {
                flags.push("O_CREAT");
            }
            if *trunc {
                flags.push("O_TRUNC");
            }
            vec![("pathname", json!(path)), ("flags", json!(flags))]
        }
        Call::Close { fd } => vec![("fd", json!(fd))],
        Call::Read { fd, count } | Call::Write { fd, count } => {
            vec![("fd", json!(fd)), ("count", json!(count))]
        }
        Call::Unlink { path } | Call::Mkdir { path } => vec![("pathname", json!(path))],
        Call::SetLabel { path, int, sec } => vec![
            ("pathname", json!(path)),
            ("int", json!(int)),
            ("sec", json!({ "level": sec.level, "cats": sec.cats })),
        ],
    };
    pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}

fn success(done: Done) -> (SyscallResult, BTreeMap<String, Value>) {
    let mut result = SyscallResult::ok(done.code);
    if let Some(fd) = done.fd {
        result.outputs.insert("fd".into(), json!(fd));
    }
    let mut aux = BTreeMap::new();
    if let Some((ino, parent, name)) = done.created {
        aux.insert("inode".into(), json!(ino));
        aux.insert("parent".into(), json!(parent));
        aux.insert("name".into(), json!(name));
    }
    (result, aux)
}

/// Runs the simulator and records every call. The same config always yields
/// the same trace.
pub fn generate_trace(cfg: &SimConfig) -> Result<Generated, MockError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut kernel = initial_kernel(&cfg.universe, &mut rng);
    let snapshot = kernel.snapshot();
    let workload = Workload::new(cfg, kernel.procs.keys().copied().collect());

    let mut fired = vec![false; cfg.faults.len()];
    let mut injections = Vec::new();
    let mut calls = Vec::with_capacity(cfg.n_calls);
    for seq in 1..=cfg.n_calls as u64 {
        let (pid, call) = workload.next(&mut rng);
        let natural = kernel.check(pid, &call, true);
        let fault = cfg.faults.iter().enumerate().position(|(i, f)| {
            !fired[i] && f.trigger.matches(seq, call.name()) && effective(f, &natural)
        });
        let (result, aux) = match fault.map(|i| (i, &cfg.faults[i].kind)) {
            None => match natural {
                Ok(()) => success(kernel.perform(pid, &call).expect("checked call proceeds")),
                Err(d) => (SyscallResult::err(d.errno), BTreeMap::new()),
            },
            Some((i, kind)) => {
                fired[i] = true;
                injections.push(Injection { fault: i, seq });
                match kind {
                    FaultKind::WrongGrant | FaultKind::MissingHook => {
                        success(kernel.perform(pid, &call).expect("only the hook objected"))
                    }
                    FaultKind::WrongDeny { errno } => (SyscallResult::err(*errno), BTreeMap::new()),
                    FaultKind::ResourceExhaustion => (SyscallResult::err(ENOMEM), BTreeMap::new()),
                }
            }
        };
        calls.push(SyscallRecord {
            seq,
            name: call.name().to_owned(),
            pid,
            args: args_of(&call),
            result,
            aux,
        });
    }
    Ok(Generated {
        trace: Trace {
            snapshot,
            calls,
            final_snapshot: Some(kernel.snapshot()),
        },
        injections,
    })
}

fn effective(f: &FaultSpec, natural: &Result<(), super::kernel::Denial>) -> bool {
    match f.kind {
        FaultKind::WrongGrant | FaultKind::MissingHook => {
            matches!(natural, Err(d) if d.hook)
        }
        FaultKind::WrongDeny { .. } => natural.is_ok(),
        FaultKind::ResourceExhaustion => true,
    }
}

/// Generates `cfg` with `fault` added, failing when the fault would never
/// change an outcome.
pub fn inject(cfg: &SimConfig, fault: FaultSpec) -> Result<Generated, MockError> {
    let mut cfg = cfg.clone();
    cfg.faults.push(fault.clone());
    let out = generate_trace(&cfg)?;
    if out.seq_of(cfg.faults.len() - 1).is_none() {
        return Err(MockError::FaultNeverTriggers(fault));
    }
    Ok(out)
}

/// Kernel state a config starts from, before any call.
pub fn initial_state(cfg: &SimConfig) -> Result<SimKernel, MockError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(initial_kernel(&cfg.universe, &mut rng))
}
