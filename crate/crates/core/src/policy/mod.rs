//! Executable access-control model: value-semantic state, a catalog of
//! guarded events, a three-group invariant checker and information-flow
//! derivation.

pub mod events;
pub mod flows;
pub mod invariants;
pub mod state;
pub mod types;
pub mod universe;

pub use events::{
    apply_event, apply_event_mut, enabled, relabel_int_ok, relabel_sec_ok, Args, EventDescriptor,
    EventError, Param, ParamType,
};
pub use flows::{derive_flows, FlowNode};
pub use invariants::{check_invariants, InvariantGroup, Violation, Witness};
pub use state::{path_components, PolicyState, Resolution};
pub use types::*;
