//! Simulated kernel that produces syscall traces, optionally with faults
//! injected into its security checks.

pub mod config;
pub mod generate;
pub mod kernel;
pub mod workload;

pub use config::{FaultKind, FaultSpec, SimConfig, Trigger, Universe, SYSCALLS};
pub use generate::{generate_trace, initial_state, inject, Generated, Injection};
pub use kernel::{Call, Denial, Label, SimKernel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MockError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("fault {0:?} never changes an outcome in this run")]
    FaultNeverTriggers(FaultSpec),
}
