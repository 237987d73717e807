use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::state::PolicyState;
use super::types::{AccessKind, EntityId, SubjectId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FlowNode {
    Subject(SubjectId),
    Entity(EntityId),
}

/// One-step flow edges: a writer flows into what it writes, a read entity
/// flows into its reader.
pub fn flow_edges(state: &PolicyState) -> BTreeSet<(FlowNode, FlowNode)> {
    let mut edges = BTreeSet::new();
    for (s, set) in &state.subject_accesses {
        for (e, a) in set {
            match a {
                AccessKind::WriteA => {
                    edges.insert((FlowNode::Subject(*s), FlowNode::Entity(*e)));
                }
                AccessKind::ReadA => {
                    edges.insert((FlowNode::Entity(*e), FlowNode::Subject(*s)));
                }
                AccessKind::OwnA => {}
            }
        }
    }
    edges
}

/// Transitive closure of [`flow_edges`]: every pair connected by a path of
/// one or more edges.
pub fn derive_flows(state: &PolicyState) -> BTreeSet<(FlowNode, FlowNode)> {
    let mut adj: BTreeMap<FlowNode, Vec<FlowNode>> = BTreeMap::new();
    for (a, b) in flow_edges(state) {
        adj.entry(a).or_default().push(b);
    }
    let mut out = BTreeSet::new();
    for &start in adj.keys() {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<FlowNode> = adj[&start].iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n) {
                continue;
            }
            out.insert((start, n));
            if let Some(next) = adj.get(&n) {
                queue.extend(next.iter().copied());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_accesses_no_flows() {
        assert!(derive_flows(&PolicyState::empty()).is_empty());
    }

    #[test]
    fn write_then_read_composes() {
        let mut st = PolicyState::empty();
        let (s1, s2, e) = (SubjectId(1), SubjectId(2), EntityId(1));
        st.subject_accesses
            .insert(s1, [(e, AccessKind::WriteA)].into());
        st.subject_accesses.insert(s2, [(e, AccessKind::ReadA)].into());
        let flows = derive_flows(&st);
        let expected: BTreeSet<_> = [
            (FlowNode::Subject(s1), FlowNode::Entity(e)),
            (FlowNode::Entity(e), FlowNode::Subject(s2)),
            (FlowNode::Subject(s1), FlowNode::Subject(s2)),
        ]
        .into();
        assert_eq!(flows, expected);
    }
}
