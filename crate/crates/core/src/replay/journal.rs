use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::graphs::errno;
use crate::trace::SyscallRecord;

use super::ReplayError;

/// Ordered `INFO < WARN < CRIT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    #[serde(rename = "INFO")]
    Info,
    #[serde(rename = "WARN")]
    Warn,
    #[serde(rename = "CRIT")]
    Crit,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "INFO",
            Severity::Warn => "WARN",
            Severity::Crit => "CRIT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntryKind {
    /// The model denies, the kernel granted.
    DeniedButGranted,
    /// The model grants, the kernel denied.
    GrantedButDenied,
    FinalStateDivergence,
    /// No final snapshot; the closing comparison did not run.
    SnapshotSkipped,
    /// The trace contains a syscall the graph catalog does not model.
    UnmodeledSyscall,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub severity: Severity,
    /// Seq of the call, or 0 for whole-trace entries.
    pub seq: u64,
    pub kind: EntryKind,
    pub detail: Value,
}

impl JournalEntry {
    pub fn new(severity: Severity, seq: u64, kind: EntryKind, detail: Value) -> Self {
        JournalEntry {
            severity,
            seq,
            kind,
            detail,
        }
    }
}

impl fmt::Display for JournalEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} seq={} {:?}", self.severity, self.seq, self.kind)?;
        if let Some(obj) = self.detail.as_object() {
            for (k, v) in obj {
                match v {
                    Value::String(s) => write!(f, " {k}={s}")?,
                    Value::Array(a) => write!(f, " {k}=[{} items]", a.len())?,
                    other => write!(f, " {k}={other}")?,
                }
            }
        }
        Ok(())
    }
}

/// Triage of a call the model would have granted but the kernel denied:
/// out-of-memory is benign, an invalid argument hints at an incomplete
/// model, a permission error points at the kernel or security module, and
/// anything else is logged for manual review.
pub fn check_err_code(record: &SyscallRecord) -> Result<Option<JournalEntry>, ReplayError> {
    let Some(errno) = record.result.errno() else {
        return Err(ReplayError::NotAFailure { seq: record.seq });
    };
    let severity = match errno {
        errno::ENOMEM => return Ok(None),
        errno::EINVAL => Severity::Warn,
        errno::EACCES | errno::EPERM => Severity::Crit,
        _ => Severity::Warn,
    };
    Ok(Some(JournalEntry::new(
        severity,
        record.seq,
        EntryKind::GrantedButDenied,
        json!({
            "syscall": record.name,
            "code": record.result.code,
            "errno": errno::name(errno).map_or_else(|| errno.to_string(), str::to_owned),
        }),
    )))
}

pub fn journal_to_jsonl(entries: &[JournalEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("journal entries serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_journal(text: &str) -> Result<Vec<JournalEntry>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}
