use serde_json::json;

use crate::graphs::{errno, walk, GraphCatalog, GraphError, SyscallParams, Verdict};
use crate::policy::invariants::probe_invariants;
use crate::policy::PolicyState;
use crate::trace::{compare_states, map_snapshot, SyscallRecord, Trace};

use super::coverage::CoverageReport;
use super::journal::{check_err_code, EntryKind, JournalEntry, Severity};
use super::ReplayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    pub status: Status,
    pub journal: Vec<JournalEntry>,
    /// Calls handled; on failure, the seq of the call that stopped replay.
    pub calls_processed: u64,
    pub coverage: CoverageReport,
    /// Model state after the last handled call.
    pub state: PolicyState,
}

impl ReplayResult {
    pub fn max_severity(&self) -> Option<Severity> {
        self.journal.iter().map(|e| e.severity).max()
    }

    pub fn count(&self, severity: Severity) -> usize {
        self.journal.iter().filter(|e| e.severity == severity).count()
    }
}

/// What one call did to the model, reported to observers.
pub struct Step<'a> {
    pub record: &'a SyscallRecord,
    /// `None` for unmodeled syscalls.
    pub model_granted: Option<bool>,
    pub real_granted: bool,
    pub before: &'a PolicyState,
    pub after: &'a PolicyState,
}

pub fn replay_trace(trace: &Trace, catalog: &GraphCatalog) -> Result<ReplayResult, ReplayError> {
    replay_trace_with(trace, catalog, &mut |_| {})
}

/// Replays every call of `trace` in order. Verdicts that agree advance the
/// model (only a grant changes it). A model denial of a call the kernel
/// granted stops replay with a critical entry. A model grant of a call the
/// kernel denied is triaged by errno and the model keeps its pre-call state.
pub fn replay_trace_with(
    trace: &Trace,
    catalog: &GraphCatalog,
    on_step: &mut dyn FnMut(&Step),
) -> Result<ReplayResult, ReplayError> {
    let (mut state, mut ids) = map_snapshot(&trace.snapshot)?;
    let mut coverage = CoverageReport::for_catalog(catalog);
    coverage.record_probe(&probe_invariants(&state));
    let mut journal = Vec::new();
    let mut processed = 0;

    for rec in &trace.calls {
        let Ok(graph) = catalog.get(&rec.name) else {
            journal.push(JournalEntry::new(
                Severity::Warn,
                rec.seq,
                EntryKind::UnmodeledSyscall,
                json!({ "syscall": rec.name }),
            ));
            on_step(&Step {
                record: rec,
                model_granted: None,
                real_granted: rec.result.granted(),
                before: &state,
                after: &state,
            });
            processed += 1;
            continue;
        };
        let call_err = |source: GraphError| ReplayError::Call {
            seq: rec.seq,
            source,
        };
        let caller = ids.subject(rec.pid).ok_or_else(|| {
            call_err(GraphError::MalformedParams {
                syscall: rec.name.clone(),
                reason: format!("pid {} is not in the snapshot", rec.pid),
            })
        })?;
        let params = SyscallParams::decode(&rec.name, &graph.signature, caller, &rec.args, &rec.aux)
            .map_err(call_err)?;
        let outcome = walk(&state, graph, &params, &mut coverage).map_err(call_err)?;
        let real = rec.result.granted();

        match (&outcome.verdict, real) {
            (Verdict::Granted, true) => {
                if let Some(inode) = params.inode {
                    ids.add_inode(inode.0);
                }
                let probe = probe_invariants(&outcome.state);
                if !probe.violations.is_empty() {
                    return Err(ReplayError::ModelInvariant {
                        seq: rec.seq,
                        violations: probe.violations,
                    });
                }
                coverage.record_probe(&probe);
                on_step(&Step {
                    record: rec,
                    model_granted: Some(true),
                    real_granted: true,
                    before: &state,
                    after: &outcome.state,
                });
                state = outcome.state;
            }
            (Verdict::Denied { .. }, false) => {
                on_step(&Step {
                    record: rec,
                    model_granted: Some(false),
                    real_granted: false,
                    before: &state,
                    after: &state,
                });
            }
            (Verdict::Denied { site, conjunct, errno: e }, true) => {
                journal.push(JournalEntry::new(
                    Severity::Crit,
                    rec.seq,
                    EntryKind::DeniedButGranted,
                    json!({
                        "syscall": rec.name,
                        "site": site,
                        "conjunct": conjunct,
                        "errno": errno::name(*e),
                        "path": outcome.path,
                        "code": rec.result.code,
                    }),
                ));
                on_step(&Step {
                    record: rec,
                    model_granted: Some(false),
                    real_granted: true,
                    before: &state,
                    after: &state,
                });
                return Ok(ReplayResult {
                    status: Status::Failure,
                    journal,
                    calls_processed: rec.seq,
                    coverage,
                    state,
                });
            }
            (Verdict::Granted, false) => {
                if let Some(mut entry) = check_err_code(rec)? {
                    entry.detail["path"] = json!(outcome.path);
                    journal.push(entry);
                }
                // The outcome is dropped: the model keeps its pre-call value.
                on_step(&Step {
                    record: rec,
                    model_granted: Some(true),
                    real_granted: false,
                    before: &state,
                    after: &state,
                });
            }
        }
        processed += 1;
    }

    match &trace.final_snapshot {
        None => journal.push(JournalEntry::new(
            Severity::Info,
            0,
            EntryKind::SnapshotSkipped,
            json!({ "reason": "trace has no final snapshot" }),
        )),
        Some(fin) => {
            let (expected, _) = map_snapshot(fin)?;
            let divergences = compare_states(&expected, &state);
            if !divergences.is_empty() {
                journal.push(JournalEntry::new(
                    Severity::Warn,
                    0,
                    EntryKind::FinalStateDivergence,
                    json!({ "divergences": divergences }),
                ));
            }
        }
    }
    Ok(ReplayResult {
        status: Status::Success,
        journal,
        calls_processed: processed,
        coverage,
        state,
    })
}
