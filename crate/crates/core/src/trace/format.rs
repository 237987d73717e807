use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::policy::{AccessKind, RoleKind, SecurityLabel};

use super::TraceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotUser {
    pub uid: u64,
    pub roles: Vec<u64>,
    /// Highest integrity level the user's processes may run at.
    pub int: u32,
    /// Clearance: highest label the user's processes may run at.
    pub sec: SecurityLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotFd {
    pub fd: u32,
    pub inode: u64,
    pub access: Vec<AccessKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotAccess {
    pub inode: u64,
    pub access: AccessKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotProcess {
    pub pid: u64,
    pub uid: u64,
    pub int: u32,
    pub sec: SecurityLabel,
    pub fds: Vec<SnapshotFd>,
    /// Accesses the security module currently accounts to the process.
    pub accesses: Vec<SnapshotAccess>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotFile {
    pub inode: u64,
    pub parent: Option<u64>,
    pub name: String,
    pub is_dir: bool,
    pub int: u32,
    pub sec: SecurityLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotRole {
    pub id: u64,
    pub kind: RoleKind,
    pub rights: Vec<SnapshotAccess>,
}

/// Kernel state as captured at one instant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSnapshot {
    pub users: Vec<SnapshotUser>,
    pub processes: Vec<SnapshotProcess>,
    pub files: Vec<SnapshotFile>,
    pub roles: Vec<SnapshotRole>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyscallResult {
    /// Non-negative on success, `-errno` on failure.
    pub code: i64,
    #[serde(default)]
    pub outputs: BTreeMap<String, Value>,
}

impl SyscallResult {
    pub fn ok(code: i64) -> Self {
        SyscallResult {
            code,
            outputs: BTreeMap::new(),
        }
    }

    pub fn err(errno: i32) -> Self {
        SyscallResult::ok(-(errno as i64))
    }

    pub fn granted(&self) -> bool {
        self.code >= 0
    }

    pub fn errno(&self) -> Option<i32> {
        (self.code < 0).then(|| (-self.code) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyscallRecord {
    pub seq: u64,
    pub name: String,
    pub pid: u64,
    #[serde(default)]
    pub args: BTreeMap<String, Value>,
    pub result: SyscallResult,
    #[serde(default)]
    pub aux: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub snapshot: KernelSnapshot,
    pub calls: Vec<SyscallRecord>,
    pub final_snapshot: Option<KernelSnapshot>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Snapshot(KernelSnapshot),
    Syscall(SyscallRecord),
    FinalSnapshot(KernelSnapshot),
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RecordRef<'a> {
    Snapshot(&'a KernelSnapshot),
    Syscall(&'a SyscallRecord),
    FinalSnapshot(&'a KernelSnapshot),
}

/// Parses a line-delimited trace. Blank lines are ignored; line numbers in
/// errors are 1-based and count blank lines.
pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    let mut snapshot = None;
    let mut calls: Vec<SyscallRecord> = Vec::new();
    let mut final_snapshot = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| TraceError::MalformedLine { line, reason };
        let record: Record = serde_json::from_str(raw).map_err(|e| bad(e.to_string()))?;
        if final_snapshot.is_some() {
            return Err(bad("record after the final snapshot".into()));
        }
        match record {
            Record::Snapshot(s) => {
                if snapshot.is_some() {
                    return Err(bad("second initial snapshot".into()));
                }
                snapshot = Some(s);
            }
            _ if snapshot.is_none() => return Err(TraceError::MissingSnapshot),
            Record::Syscall(c) => {
                if c.seq == 0 {
                    return Err(bad("seq must be positive".into()));
                }
                if c.result.code < 0 && !c.result.outputs.is_empty() {
                    return Err(bad("failed call carries outputs".into()));
                }
                if let Some(prev) = calls.last() {
                    if c.seq <= prev.seq {
                        return Err(TraceError::NonMonotonicSeq {
                            line,
                            previous: prev.seq,
                            seq: c.seq,
                        });
                    }
                }
                calls.push(c);
            }
            Record::FinalSnapshot(s) => final_snapshot = Some(s),
        }
    }
    Ok(Trace {
        snapshot: snapshot.ok_or(TraceError::MissingSnapshot)?,
        calls,
        final_snapshot,
    })
}

pub fn parse_trace_bytes(bytes: &[u8]) -> Result<Trace, TraceError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TraceError::MalformedLine {
        line: bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count() + 1,
        reason: "invalid UTF-8".into(),
    })?;
    parse_trace(text)
}

/// Canonical form: one record per line, fixed field order, newline
/// terminated.
pub fn serialize_trace(trace: &Trace) -> String {
    let mut out = String::new();
    let mut push = |r: RecordRef| {
        out.push_str(&serde_json::to_string(&r).expect("trace records serialize"));
        out.push('\n');
    };
    push(RecordRef::Snapshot(&trace.snapshot));
    for c in &trace.calls {
        push(RecordRef::Syscall(c));
    }
    if let Some(f) = &trace.final_snapshot {
        push(RecordRef::FinalSnapshot(f));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SNAP: &str = r#"{"type":"snapshot","users":[],"processes":[],"files":[],"roles":[]}"#;

    fn call(seq: u64) -> String {
        format!(
            r#"{{"type":"syscall","seq":{seq},"name":"close","pid":1,"args":{{"fd":3}},"result":{{"code":-9}}}}"#
        )
    }

    #[test]
    fn minimal_trace() {
        let t = parse_trace(&format!("{SNAP}\n{}\n", call(1))).unwrap();
        assert_eq!(t.calls.len(), 1);
        assert_eq!(t.calls[0].result.errno(), Some(9));
        assert!(t.final_snapshot.is_none());
    }

    #[test]
    fn out_of_order_seq() {
        let text = [SNAP.to_owned(), call(1), call(3), call(2)].join("\n");
        assert_eq!(
            parse_trace(&text),
            Err(TraceError::NonMonotonicSeq {
                line: 4,
                previous: 3,
                seq: 2
            })
        );
    }

    #[test]
    fn snapshot_must_come_first() {
        assert_eq!(parse_trace(&call(1)), Err(TraceError::MissingSnapshot));
        assert_eq!(parse_trace(""), Err(TraceError::MissingSnapshot));
    }

    #[test]
    fn malformed_lines_are_located() {
        let text = format!("{SNAP}\n\n{{\"type\":\"syscall\"}}\n");
        assert!(matches!(
            parse_trace(&text),
            Err(TraceError::MalformedLine { line: 3, .. })
        ));
        let extra = SNAP.replace("\"roles\"", "\"shared\":[],\"roles\"");
        assert!(matches!(
            parse_trace(&extra),
            Err(TraceError::MalformedLine { line: 1, .. })
        ));
        let outputs = format!(
            "{SNAP}\n{}",
            r#"{"type":"syscall","seq":1,"name":"read","pid":1,"args":{},"result":{"code":-9,"outputs":{"n":1}}}"#
        );
        assert!(matches!(
            parse_trace(&outputs),
            Err(TraceError::MalformedLine { line: 2, .. })
        ));
    }

    #[test]
    fn canonical_form_is_a_fixed_point() {
        let text = format!("{SNAP}\n{}", call(2));
        let t = parse_trace(&text).unwrap();
        let once = serialize_trace(&t);
        assert_eq!(parse_trace(&once).unwrap(), t);
        assert_eq!(serialize_trace(&parse_trace(&once).unwrap()), once);
        assert!(once.contains(r#""aux":{}"#));
    }
}
