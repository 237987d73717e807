//! On-disk trace format, the mapping from kernel snapshots to model states,
//! and state comparison.

mod compare;
mod format;
mod mapping;

use std::path::Path;

use thiserror::Error;

use crate::policy::Violation;

pub use compare::{compare_states, Divergence};
pub use format::{
    parse_trace, parse_trace_bytes, serialize_trace, KernelSnapshot, SnapshotAccess, SnapshotFd,
    SnapshotFile, SnapshotProcess, SnapshotRole, SnapshotUser, SyscallRecord, SyscallResult,
    Trace,
};
pub use mapping::{export_snapshot, map_snapshot, IdMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("trace does not start with a snapshot record")]
    MissingSnapshot,
    #[error("line {line}: seq {seq} does not follow {previous}")]
    NonMonotonicSeq { line: usize, previous: u64, seq: u64 },
    #[error("snapshot declares {kind} {id} twice")]
    DuplicateId { kind: &'static str, id: u64 },
    #[error("snapshot violates {} invariant(s): {}", .0.len(), summarize(.0))]
    InconsistentSnapshot(Vec<Violation>),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

fn summarize(v: &[Violation]) -> String {
    let shown: Vec<String> = v.iter().take(3).map(|x| x.to_string()).collect();
    let more = if v.len() > 3 { ", ..." } else { "" };
    format!("{}{more}", shown.join(", "))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| TraceError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_trace_bytes(&bytes)
}

pub fn write_trace(path: impl AsRef<Path>, trace: &Trace) -> Result<(), TraceError> {
    let path = path.as_ref();
    std::fs::write(path, serialize_trace(trace)).map_err(|e| TraceError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}
