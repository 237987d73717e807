use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::policy::{apply_event_mut, Args, EventError, PolicyState};

use super::params::{ArgSpec, SyscallParams};
use super::GraphError;

pub type Cond = fn(&PolicyState, &SyscallParams) -> bool;
pub type Binder = fn(&PolicyState, &SyscallParams) -> Vec<Args>;
pub type LocalFn = fn(&mut PolicyState, &SyscallParams) -> Option<i64>;

/// A named guard conjunct of a syscall graph and the errno reported when it
/// is the first one to fail.
#[derive(Clone, Copy)]
pub struct Conjunct {
    pub name: &'static str,
    pub errno: i32,
    pub holds: Cond,
}

#[derive(Clone, Copy)]
pub enum Effect {
    /// Pure decision point.
    Skip,
    /// Applies a catalog event once per binding, in order.
    Refines { event: &'static str, bind: Binder },
    /// Bookkeeping outside the catalog; may set the return value.
    Local { what: &'static str, run: LocalFn },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Initial,
    Inner,
    Final,
}

#[derive(Clone)]
pub struct Arc {
    pub label: &'static str,
    pub when: Cond,
    pub to: &'static str,
}

#[derive(Clone)]
pub struct EventNode {
    pub name: &'static str,
    pub kind: NodeKind,
    pub guard: Vec<&'static str>,
    pub effect: Effect,
    pub arcs: Vec<Arc>,
}

fn always(_: &PolicyState, _: &SyscallParams) -> bool {
    true
}

impl EventNode {
    pub fn new(name: &'static str, kind: NodeKind) -> Self {
        EventNode {
            name,
            kind,
            guard: Vec::new(),
            effect: Effect::Skip,
            arcs: Vec::new(),
        }
    }

    pub fn initial(name: &'static str) -> Self {
        Self::new(name, NodeKind::Initial)
    }

    pub fn inner(name: &'static str) -> Self {
        Self::new(name, NodeKind::Inner)
    }

    pub fn last(name: &'static str) -> Self {
        Self::new(name, NodeKind::Final)
    }

    pub fn guard(mut self, conjuncts: &[&'static str]) -> Self {
        self.guard.extend_from_slice(conjuncts);
        self
    }

    pub fn refines(mut self, event: &'static str, bind: Binder) -> Self {
        self.effect = Effect::Refines { event, bind };
        self
    }

    pub fn local(mut self, what: &'static str, run: LocalFn) -> Self {
        self.effect = Effect::Local { what, run };
        self
    }

    pub fn arc(mut self, label: &'static str, when: Cond, to: &'static str) -> Self {
        self.arcs.push(Arc { label, when, to });
        self
    }

    pub fn then(self, to: &'static str) -> Self {
        self.arc("always", always, to)
    }

    pub fn refined_event(&self) -> Option<&'static str> {
        match self.effect {
            Effect::Refines { event, .. } => Some(event),
            _ => None,
        }
    }
}

/// Event graph of one syscall.
#[derive(Clone)]
pub struct SyscallGraph {
    pub syscall: &'static str,
    pub signature: Vec<ArgSpec>,
    pub conjuncts: Vec<Conjunct>,
    pub nodes: Vec<EventNode>,
    index: BTreeMap<&'static str, usize>,
}

impl SyscallGraph {
    pub fn new(syscall: &'static str, signature: Vec<ArgSpec>) -> Self {
        SyscallGraph {
            syscall,
            signature,
            conjuncts: Vec::new(),
            nodes: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn conjunct(mut self, name: &'static str, errno: i32, holds: Cond) -> Self {
        self.conjuncts.push(Conjunct { name, errno, holds });
        self
    }

    pub fn node(mut self, node: EventNode) -> Self {
        self.index.entry(node.name).or_insert(self.nodes.len());
        self.nodes.push(node);
        self
    }

    pub fn get_node(&self, name: &str) -> Option<&EventNode> {
        self.index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn get_conjunct(&self, name: &str) -> Option<&Conjunct> {
        self.conjuncts.iter().find(|c| c.name == name)
    }

    pub fn initial(&self) -> Option<&EventNode> {
        self.nodes.iter().find(|n| n.kind == NodeKind::Initial)
    }

    fn malformed(&self, reason: String) -> GraphError {
        GraphError::Malformed {
            syscall: self.syscall.to_owned(),
            reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Granted,
    Denied {
        /// Node whose guard failed, or which had no viable successor.
        site: &'static str,
        /// First failing conjunct; `None` when no successor was viable.
        conjunct: Option<&'static str>,
        errno: i32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayOutcome {
    pub verdict: Verdict,
    /// Nodes visited, in order, including the denial site.
    pub path: Vec<&'static str>,
    /// Post-state when granted; the untouched input when denied.
    pub state: PolicyState,
    /// Return value as the kernel would report it; `-errno` when denied.
    pub return_value: i64,
}

impl ReplayOutcome {
    pub fn granted(&self) -> bool {
        self.verdict == Verdict::Granted
    }

    pub fn errno(&self) -> Option<i32> {
        match &self.verdict {
            Verdict::Granted => None,
            Verdict::Denied { errno, .. } => Some(*errno),
        }
    }
}

/// Receives every node entered and every conjunct evaluated during a walk.
pub trait WalkObserver {
    fn node(&mut self, _graph: &SyscallGraph, _node: &EventNode) {}
    fn conjunct(&mut self, _graph: &SyscallGraph, _conjunct: &Conjunct, _holds: bool) {}
}

impl WalkObserver for () {}

/// Walks `graph` from its initial node. Guard conjuncts short-circuit; the
/// first failing one denies with its errno. A node with no viable outgoing
/// arc denies with `EINVAL`.
pub fn replay_syscall(
    state: &PolicyState,
    graph: &SyscallGraph,
    params: &SyscallParams,
) -> Result<ReplayOutcome, GraphError> {
    walk(state, graph, params, &mut ())
}

pub fn walk(
    state: &PolicyState,
    graph: &SyscallGraph,
    params: &SyscallParams,
    observer: &mut dyn WalkObserver,
) -> Result<ReplayOutcome, GraphError> {
    let end = run(state, graph, params, observer)?;
    let state = match (&end.verdict, end.post) {
        (Verdict::Granted, Some(post)) => post,
        _ => state.clone(),
    };
    Ok(ReplayOutcome {
        verdict: end.verdict,
        path: end.path,
        state,
        return_value: end.return_value,
    })
}

pub(crate) struct WalkEnd {
    pub verdict: Verdict,
    pub path: Vec<&'static str>,
    /// Post-state, when the walk changed anything.
    pub post: Option<PolicyState>,
    pub return_value: i64,
}

/// The walk proper. The input is only copied once an effect needs to write.
pub(crate) fn run(
    state: &PolicyState,
    graph: &SyscallGraph,
    params: &SyscallParams,
    observer: &mut dyn WalkObserver,
) -> Result<WalkEnd, GraphError> {
    params
        .conforms(&graph.signature)
        .map_err(|reason| GraphError::MalformedParams {
            syscall: graph.syscall.to_owned(),
            reason,
        })?;
    if !state.subjects.contains(&params.caller) {
        return Err(GraphError::MalformedParams {
            syscall: graph.syscall.to_owned(),
            reason: format!("unknown caller {}", params.caller),
        });
    }
    let mut node = graph
        .initial()
        .ok_or_else(|| graph.malformed("no initial node".into()))?;
    let mut work = Cow::Borrowed(state);
    let mut path = Vec::new();
    let mut ret = 0;
    let deny = |path, site, conjunct, errno: i32| WalkEnd {
        verdict: Verdict::Denied {
            site,
            conjunct,
            errno,
        },
        path,
        post: None,
        return_value: -(errno as i64),
    };
    loop {
        path.push(node.name);
        observer.node(graph, node);
        if path.len() > graph.nodes.len() * 4 + 4 {
            return Err(graph.malformed(format!("walk does not terminate at `{}`", node.name)));
        }
        for &name in &node.guard {
            let c = graph
                .get_conjunct(name)
                .ok_or_else(|| graph.malformed(format!("unknown conjunct `{name}`")))?;
            let holds = (c.holds)(&work, params);
            observer.conjunct(graph, c, holds);
            if !holds {
                return Ok(deny(path, node.name, Some(c.name), c.errno));
            }
        }
        match node.effect {
            Effect::Skip => {}
            Effect::Refines { event, bind } => {
                for args in bind(&work, params) {
                    apply_event_mut(work.to_mut(), event, &args).map_err(|e| {
                        GraphError::Refinement {
                            syscall: graph.syscall.to_owned(),
                            node: node.name.to_owned(),
                            event: event.to_owned(),
                            conjunct: match e {
                                EventError::GuardFailure { conjunct, .. } => conjunct.to_owned(),
                                other => other.to_string(),
                            },
                        }
                    })?;
                }
            }
            Effect::Local { run, .. } => {
                if let Some(r) = run(work.to_mut(), params) {
                    ret = r;
                }
            }
        }
        if node.kind == NodeKind::Final {
            return Ok(WalkEnd {
                verdict: Verdict::Granted,
                path,
                post: match work {
                    Cow::Owned(s) => Some(s),
                    Cow::Borrowed(_) => None,
                },
                return_value: ret,
            });
        }
        let mut viable = node.arcs.iter().filter(|a| (a.when)(&work, params));
        let Some(first) = viable.next() else {
            return Ok(deny(path, node.name, None, super::errno::EINVAL));
        };
        let extra = viable.count();
        if extra > 0 {
            return Err(GraphError::Nondeterministic {
                syscall: graph.syscall.to_owned(),
                node: node.name.to_owned(),
                count: extra + 1,
            });
        }
        node = graph
            .get_node(first.to)
            .ok_or_else(|| graph.malformed(format!("arc to unknown node `{}`", first.to)))?;
    }
}
