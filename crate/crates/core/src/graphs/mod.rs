//! Syscall event graphs: each modeled syscall is a small directed graph of
//! catalog events, walked against a policy state to decide grant or deny.

mod catalog;
mod dot;
pub mod errno;
mod graph;
mod params;
mod validate;

use thiserror::Error;

pub use catalog::{bundled_catalog, GraphCatalog};
pub use dot::to_dot;
pub use graph::{
    replay_syscall, walk, Arc, Conjunct, Effect, EventNode, NodeKind, ReplayOutcome,
    SyscallGraph, Verdict, WalkObserver,
};
pub use params::{ArgSpec, ArgType, OpenFlags, OpenMode, SyscallParams};
pub use validate::{bounded_cases, BoundedCases, BOUNDED_PATHS, validate_graph, validate_structure, GraphDefect};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("no graph for syscall `{0}`")]
    UnknownSyscall(String),
    #[error("malformed parameters for `{syscall}`: {reason}")]
    MalformedParams { syscall: String, reason: String },
    #[error("graph `{syscall}` node `{node}` has {count} viable successors")]
    Nondeterministic {
        syscall: String,
        node: String,
        count: usize,
    },
    #[error("graph `{syscall}` node `{node}`: event `{event}` refused by `{conjunct}`")]
    Refinement {
        syscall: String,
        node: String,
        event: String,
        conjunct: String,
    },
    #[error("graph `{syscall}` is malformed: {reason}")]
    Malformed { syscall: String, reason: String },
}
