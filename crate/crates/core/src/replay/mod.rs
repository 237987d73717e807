//! Whole-trace replay: verdict comparison per call, errno triage, final
//! state comparison, and coverage accounting.

mod coverage;
mod engine;
mod journal;

use thiserror::Error;

use crate::graphs::GraphError;
use crate::policy::Violation;
use crate::trace::TraceError;

pub use coverage::{ConjunctCounts, CoverageReport};
pub use engine::{replay_trace, replay_trace_with, ReplayResult, Status, Step};
pub use journal::{
    check_err_code, journal_to_jsonl, parse_journal, EntryKind, JournalEntry, Severity,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("seq {seq}: {source}")]
    Call { seq: u64, source: GraphError },
    #[error("seq {seq}: model state breaks {} invariant(s) after a granted call", .violations.len())]
    ModelInvariant { seq: u64, violations: Vec<Violation> },
    #[error("seq {seq}: call succeeded, there is no error code to triage")]
    NotAFailure { seq: u64 },
}
