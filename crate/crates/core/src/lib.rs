//! Runtime verification of operating-system syscall traces against an
//! executable access-control model combining role-based access control,
//! mandatory integrity control and multilevel security.
//!
//! The pipeline: a [`trace`] is parsed and its initial kernel snapshot mapped
//! onto a [`policy`] state; every recorded call is replayed through its
//! event graph from [`graphs`]; [`replay`] compares the model's verdict with
//! the kernel's and journals divergences. [`mock`] generates traces from a
//! simulated kernel with injectable faults.

pub mod cli;
pub mod graphs;
pub mod mock;
pub mod policy;
pub mod replay;
pub mod trace;
