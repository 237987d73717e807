use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::policy::universe::{secure_states, Bounds};
use crate::policy::{events, EntityId, PolicyState, SubjectId};

use super::graph::{run, NodeKind, SyscallGraph};
use super::params::{ArgType, OpenFlags, OpenMode, SyscallParams};
use super::GraphError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphDefect {
    NoInitial,
    MultipleInitial(Vec<String>),
    NoFinal,
    MultipleFinal(Vec<String>),
    DuplicateNode(String),
    DanglingArc { from: String, to: String },
    FinalHasArcs(String),
    DeadEnd(String),
    Unreachable(String),
    CannotReachFinal(String),
    UnknownConjunct { node: String, conjunct: String },
    UnusedConjunct(String),
    UnknownEvent { node: String, event: String },
    /// More than one outgoing arc condition held at once.
    Nondeterministic {
        node: String,
        arcs: Vec<String>,
        witness: String,
    },
    /// A node was reached with its guards satisfied but the catalog refused
    /// the event it refines.
    CatalogDisagreement {
        node: String,
        event: String,
        conjunct: String,
        witness: String,
    },
}

impl GraphDefect {
    pub fn is_nondeterminism(&self) -> bool {
        matches!(self, GraphDefect::Nondeterministic { .. })
    }
}

impl fmt::Display for GraphDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use GraphDefect::*;
        match self {
            NoInitial => write!(f, "no initial node"),
            MultipleInitial(ns) => write!(f, "several initial nodes: {}", ns.join(", ")),
            NoFinal => write!(f, "no final node"),
            MultipleFinal(ns) => write!(f, "several final nodes: {}", ns.join(", ")),
            DuplicateNode(n) => write!(f, "node `{n}` defined twice"),
            DanglingArc { from, to } => write!(f, "arc `{from}` -> `{to}` leads nowhere"),
            FinalHasArcs(n) => write!(f, "final node `{n}` has outgoing arcs"),
            DeadEnd(n) => write!(f, "node `{n}` has no outgoing arcs"),
            Unreachable(n) => write!(f, "node `{n}` is unreachable"),
            CannotReachFinal(n) => write!(f, "node `{n}` cannot reach the final node"),
            UnknownConjunct { node, conjunct } => {
                write!(f, "node `{node}` uses undeclared conjunct `{conjunct}`")
            }
            UnusedConjunct(c) => write!(f, "conjunct `{c}` is never evaluated"),
            UnknownEvent { node, event } => {
                write!(f, "node `{node}` refines unknown event `{event}`")
            }
            Nondeterministic { node, arcs, witness } => write!(
                f,
                "node `{node}`: arcs {} hold together ({witness})",
                arcs.join(", ")
            ),
            CatalogDisagreement {
                node,
                event,
                conjunct,
                witness,
            } => write!(
                f,
                "node `{node}`: `{event}` refused by `{conjunct}` ({witness})"
            ),
        }
    }
}

/// Shape checks that need no states.
pub fn validate_structure(graph: &SyscallGraph) -> Vec<GraphDefect> {
    use GraphDefect::*;
    let mut out = Vec::new();
    let names_of = |kind: NodeKind| -> Vec<String> {
        graph
            .nodes
            .iter()
            .filter(|n| n.kind == kind)
            .map(|n| n.name.to_owned())
            .collect()
    };
    let initials = names_of(NodeKind::Initial);
    match initials.len() {
        0 => out.push(NoInitial),
        1 => {}
        _ => out.push(MultipleInitial(initials.clone())),
    }
    let finals = names_of(NodeKind::Final);
    match finals.len() {
        0 => out.push(NoFinal),
        1 => {}
        _ => out.push(MultipleFinal(finals.clone())),
    }

    let mut seen = BTreeSet::new();
    let mut used = BTreeSet::new();
    for n in &graph.nodes {
        if !seen.insert(n.name) {
            out.push(DuplicateNode(n.name.to_owned()));
        }
        for a in &n.arcs {
            if graph.get_node(a.to).is_none() {
                out.push(DanglingArc {
                    from: n.name.to_owned(),
                    to: a.to.to_owned(),
                });
            }
        }
        match (n.kind, n.arcs.is_empty()) {
            (NodeKind::Final, false) => out.push(FinalHasArcs(n.name.to_owned())),
            (NodeKind::Initial | NodeKind::Inner, true) => out.push(DeadEnd(n.name.to_owned())),
            _ => {}
        }
        for c in &n.guard {
            used.insert(*c);
            if graph.get_conjunct(c).is_none() {
                out.push(UnknownConjunct {
                    node: n.name.to_owned(),
                    conjunct: (*c).to_owned(),
                });
            }
        }
        if let Some(ev) = n.refined_event() {
            if events::lookup(ev).is_err() {
                out.push(UnknownEvent {
                    node: n.name.to_owned(),
                    event: ev.to_owned(),
                });
            }
        }
    }
    for c in &graph.conjuncts {
        if !used.contains(c.name) {
            out.push(UnusedConjunct(c.name.to_owned()));
        }
    }

    let succ: BTreeMap<&str, Vec<&str>> = graph
        .nodes
        .iter()
        .map(|n| (n.name, n.arcs.iter().map(|a| a.to).collect()))
        .collect();
    let mut pred: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (from, tos) in &succ {
        for to in tos {
            pred.entry(to).or_default().push(from);
        }
    }
    fn reach<'a>(starts: Vec<&'a str>, adj: &BTreeMap<&'a str, Vec<&'a str>>) -> BTreeSet<&'a str> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<&str> = starts.into_iter().collect();
        while let Some(n) = queue.pop_front() {
            if seen.insert(n) {
                queue.extend(adj.get(n).into_iter().flatten().copied());
            }
        }
        seen
    }
    let from_initial = reach(
        graph
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Initial)
            .map(|n| n.name)
            .collect(),
        &succ,
    );
    let to_final = reach(
        graph
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Final)
            .map(|n| n.name)
            .collect(),
        &pred,
    );
    for n in &graph.nodes {
        if !initials.is_empty() && !from_initial.contains(n.name) {
            out.push(Unreachable(n.name.to_owned()));
        }
        if !finals.is_empty() && !to_final.contains(n.name) {
            out.push(CannotReachFinal(n.name.to_owned()));
        }
    }
    out
}

fn witness(state: &PolicyState, params: &SyscallParams) -> String {
    let path = params
        .path
        .as_ref()
        .map(|c| format!(" path=/{}", c.join("/")))
        .unwrap_or_default();
    let flags = params
        .flags
        .map(|f| format!(" flags={}", f.symbols().join("|")))
        .unwrap_or_default();
    let fd = params.fd.map(|f| format!(" fd={f}")).unwrap_or_default();
    format!(
        "caller={}{path}{flags}{fd}; {} entities, {} subjects",
        params.caller,
        state.entities.len(),
        state.subjects.len()
    )
}

/// Structure checks, then for every case: at most one arc condition holds at
/// each node, and walking the graph never reaches a node whose refined event
/// the catalog refuses. One defect is reported per node and kind.
pub fn validate_graph<'a>(
    graph: &SyscallGraph,
    cases: impl IntoIterator<Item = (&'a PolicyState, SyscallParams)>,
) -> Vec<GraphDefect> {
    let mut out = validate_structure(graph);
    if !out.is_empty() {
        return out;
    }
    let mut nondet: BTreeMap<&str, GraphDefect> = BTreeMap::new();
    let mut disagree: BTreeMap<(String, String), GraphDefect> = BTreeMap::new();
    for (state, params) in cases {
        let params = &params;
        for n in &graph.nodes {
            if nondet.contains_key(n.name) {
                continue;
            }
            let holding: Vec<String> = n
                .arcs
                .iter()
                .filter(|a| (a.when)(state, params))
                .map(|a| format!("{}->{}", a.label, a.to))
                .collect();
            if holding.len() > 1 {
                nondet.insert(
                    n.name,
                    GraphDefect::Nondeterministic {
                        node: n.name.to_owned(),
                        arcs: holding,
                        witness: witness(state, params),
                    },
                );
            }
        }
        match run(state, graph, params, &mut ()) {
            Ok(_) => {}
            Err(GraphError::Refinement {
                node,
                event,
                conjunct,
                ..
            }) => {
                disagree
                    .entry((node.clone(), event.clone()))
                    .or_insert_with(|| GraphDefect::CatalogDisagreement {
                        node,
                        event,
                        conjunct,
                        witness: witness(state, params),
                    });
            }
            // Caught by the arc scan above.
            Err(GraphError::Nondeterministic { .. }) => {}
            Err(GraphError::MalformedParams { .. }) => {}
            Err(e) => panic!("structurally valid graph failed: {e}"),
        }
    }
    out.extend(nondet.into_values());
    out.extend(disagree.into_values());
    out
}

/// Path pool for bounded enumeration: the root, existing and missing
/// entries, a missing parent, and a path through a file.
pub const BOUNDED_PATHS: &[&str] = &["/", "/a", "/b", "/a/b", "/a/c", "/c/d", "/a/b/c"];

fn all_flags() -> Vec<OpenFlags> {
    let mut out = Vec::new();
    for mode in [OpenMode::ReadOnly, OpenMode::WriteOnly, OpenMode::ReadWrite] {
        for creat in [false, true] {
            for trunc in [false, true] {
                out.push(OpenFlags::new(mode, creat, trunc));
            }
        }
    }
    out
}

/// Secure states of the bounded universe crossed with every parameter
/// combination a graph's signature admits over small domains. Cases are
/// produced lazily: every subject of each state calls with every template.
pub struct BoundedCases {
    pub states: Vec<PolicyState>,
    pub templates: Vec<SyscallParams>,
}

impl BoundedCases {
    pub fn iter(&self) -> impl Iterator<Item = (&PolicyState, SyscallParams)> + '_ {
        self.states.iter().flat_map(move |st| {
            let fresh = EntityId(st.entities.iter().next_back().map_or(1, |e| e.0 + 1));
            st.subjects.iter().flat_map(move |s| {
                self.templates.iter().map(move |t| {
                    let mut p = t.clone();
                    p.caller = *s;
                    p.inode = Some(fresh);
                    (st, p)
                })
            })
        })
    }

    pub fn len(&self) -> usize {
        self.states
            .iter()
            .map(|s| s.subjects.len() * self.templates.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn bounded_cases(graph: &SyscallGraph, bounds: &Bounds) -> BoundedCases {
    let mut partial = vec![SyscallParams::new(SubjectId(0))];
    for spec in &graph.signature {
        let mut next = Vec::new();
        for p in &partial {
            match spec.ty {
                ArgType::Path => {
                    for path in BOUNDED_PATHS {
                        next.push(p.clone().with_path(path));
                    }
                }
                ArgType::Flags => {
                    for f in all_flags() {
                        next.push(p.clone().with_flags(f));
                    }
                }
                ArgType::Fd => {
                    for fd in [1, 2] {
                        next.push(p.clone().with_fd(fd));
                    }
                }
                ArgType::Count => next.push(p.clone().with_count(7)),
                ArgType::Int => {
                    for i in bounds.ints() {
                        let mut q = p.clone();
                        q.new_int = Some(i);
                        next.push(q);
                    }
                }
                ArgType::Sec => {
                    for l in bounds.labels() {
                        let mut q = p.clone();
                        q.new_sec = Some(l);
                        next.push(q);
                    }
                }
            }
        }
        partial = next;
    }
    BoundedCases {
        states: secure_states(bounds),
        templates: partial,
    }
}
