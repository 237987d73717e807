//! Oracles and drivers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracecheck::policy::events::CATALOG;
use tracecheck::policy::universe::{random_args, secure_states, Bounds, ParamDomains};
use tracecheck::policy::{
    apply_event, check_invariants, AccessKind, EntityId, FlowNode, PolicyState, SubjectId,
};

/// Reachability by Floyd–Warshall over the subject/entity nodes mentioned in
/// the access relation.
#[allow(clippy::needless_range_loop)]
pub fn floyd_warshall_flows(st: &PolicyState) -> BTreeSet<(FlowNode, FlowNode)> {
    let mut nodes: Vec<FlowNode> = Vec::new();
    let mut edges = Vec::new();
    for (s, set) in &st.subject_accesses {
        for (e, a) in set {
            let (from, to) = match a {
                AccessKind::WriteA => (FlowNode::Subject(*s), FlowNode::Entity(*e)),
                AccessKind::ReadA => (FlowNode::Entity(*e), FlowNode::Subject(*s)),
                AccessKind::OwnA => continue,
            };
            for n in [from, to] {
                if !nodes.contains(&n) {
                    nodes.push(n);
                }
            }
            edges.push((from, to));
        }
    }
    let n = nodes.len();
    let idx = |x: FlowNode| nodes.iter().position(|y| *y == x).unwrap();
    let mut reach = vec![vec![false; n]; n];
    for (a, b) in edges {
        reach[idx(a)][idx(b)] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            if reach[i][j] {
                out.insert((nodes[i], nodes[j]));
            }
        }
    }
    out
}

/// Random access relation over at most `max_nodes` subjects and entities.
pub fn random_access_state(rng: &mut ChaCha8Rng, max_nodes: usize) -> PolicyState {
    let total = rng.random_range(0..=max_nodes);
    let subjects = rng.random_range(0..=total);
    let entities = total - subjects;
    let mut st = PolicyState::empty();
    for s in 1..=subjects as u64 {
        let mut set = BTreeSet::new();
        for e in 1..=entities as u64 {
            for a in AccessKind::ALL {
                if rng.random_bool(0.25) {
                    set.insert((EntityId(e), a));
                }
            }
        }
        st.subjects.insert(SubjectId(s));
        st.subject_accesses.insert(SubjectId(s), set);
    }
    st
}

#[derive(Debug, Default)]
pub struct Preservation {
    pub states: usize,
    pub attempts: usize,
    pub enabled: usize,
    pub violations: Vec<String>,
}

/// Applies every enabled (event, argument) pair over the bounded domains to
/// every secure state of the bounded universe and checks the invariants of
/// each successor.
pub fn exhaustive_preservation(bounds: &Bounds) -> Preservation {
    let domains = ParamDomains::for_bounds(bounds);
    let arg_sets: Vec<_> = CATALOG.iter().map(|d| (d, domains.all_args(d))).collect();
    let mut out = Preservation::default();
    for st in secure_states(bounds) {
        out.states += 1;
        for (d, all) in &arg_sets {
            for args in all {
                out.attempts += 1;
                if d.first_failure(&st, args).is_some() {
                    continue;
                }
                out.enabled += 1;
                let next = apply_event(&st, d.name, args).unwrap();
                let v = check_invariants(&next);
                if !v.is_empty() && out.violations.len() < 10 {
                    out.violations.push(format!("{}{:?}: {:?}", d.name, args, v));
                }
            }
        }
    }
    out
}

/// Random walk over enabled catalog events from a random secure state of the
/// bounded universe, restarting when no event is enabled for a while.
pub fn random_walk(seed: u64, enabled_target: usize) -> Preservation {
    let bounds = Bounds::default();
    let starts = secure_states(&bounds);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = starts.choose(&mut rng).unwrap().clone();
    let mut out = Preservation {
        states: 1,
        ..Default::default()
    };
    let mut idle = 0;
    while out.enabled < enabled_target {
        let d = CATALOG.choose(&mut rng).unwrap();
        let args = random_args(&mut rng, d, &st, &bounds);
        out.attempts += 1;
        match apply_event(&st, d.name, &args) {
            Ok(next) => {
                out.enabled += 1;
                idle = 0;
                let v = check_invariants(&next);
                if !v.is_empty() && out.violations.len() < 10 {
                    out.violations.push(format!("{}{:?}: {:?}", d.name, args, v));
                }
                st = next;
            }
            Err(_) => {
                idle += 1;
                if idle > 1000 {
                    st = starts.choose(&mut rng).unwrap().clone();
                    out.states += 1;
                    idle = 0;
                }
            }
        }
    }
    out
}
