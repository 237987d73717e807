//! Invariant checker. Invariants fall into three groups: typing (maps are
//! total and refer to live ids), consistency (the state is structurally
//! sane) and security (accesses respect RBAC, integrity and MLS rules).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::state::PolicyState;
use super::types::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InvariantGroup {
    Typing,
    Consistency,
    Security,
}

/// The offending tuple of a violation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Witness {
    User(UserId),
    Subject(SubjectId),
    Entity(EntityId),
    Role(RoleId),
    EntityPair(EntityId, EntityId),
    SubjectEntity(SubjectId, EntityId),
    SubjectAccess(SubjectId, EntityId, AccessKind),
    RoleAccess(RoleId, EntityId, AccessKind),
    UserRole(UserId, RoleId),
    SubjectFd(SubjectId, Fd),
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::User(u) => write!(f, "({u})"),
            Witness::Subject(s) => write!(f, "({s})"),
            Witness::Entity(e) => write!(f, "({e})"),
            Witness::Role(r) => write!(f, "({r})"),
            Witness::EntityPair(a, b) => write!(f, "({a},{b})"),
            Witness::SubjectEntity(s, e) => write!(f, "({s},{e})"),
            Witness::SubjectAccess(s, e, a) => write!(f, "({s},{e},{a})"),
            Witness::RoleAccess(r, e, a) => write!(f, "({r},{e},{a})"),
            Witness::UserRole(u, r) => write!(f, "({u},{r})"),
            Witness::SubjectFd(s, fd) => write!(f, "({s},fd{fd})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub group: InvariantGroup,
    pub name: &'static str,
    pub witness: Witness,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}/{} {}", self.group, self.name, self.witness)
    }
}

/// Collects violations and counts quantifier instances per invariant.
#[derive(Debug, Default)]
pub struct Probe {
    pub violations: Vec<Violation>,
    pub instances: BTreeMap<&'static str, usize>,
}

struct Ctx<'a> {
    probe: &'a mut Probe,
    group: InvariantGroup,
    name: &'static str,
}

impl Ctx<'_> {
    fn check(&mut self, ok: bool, witness: impl FnOnce() -> Witness) {
        *self.probe.instances.entry(self.name).or_default() += 1;
        if !ok {
            self.probe.violations.push(Violation {
                group: self.group,
                name: self.name,
                witness: witness(),
            });
        }
    }
}

pub struct InvariantDescriptor {
    pub group: InvariantGroup,
    pub name: &'static str,
    check: fn(&PolicyState, &mut Ctx<'_>),
}

fn same_keys<K: Ord + Copy, V>(set: &BTreeSet<K>, map: &BTreeMap<K, V>) -> Vec<K> {
    // Keys present on exactly one side.
    let mut out: Vec<K> = set.iter().filter(|k| !map.contains_key(k)).copied().collect();
    out.extend(map.keys().filter(|k| !set.contains(k)).copied());
    out.sort();
    out
}

fn typing_keys<K: Ord + Copy, V>(
    cx: &mut Ctx<'_>,
    set: &BTreeSet<K>,
    map: &BTreeMap<K, V>,
    w: fn(K) -> Witness,
) {
    let bad = same_keys(set, map);
    for k in set.iter().chain(map.keys().filter(|k| !set.contains(k))) {
        cx.check(!bad.contains(k), || w(*k));
    }
}

fn subject_owner(st: &PolicyState, cx: &mut Ctx<'_>) {
    typing_keys(cx, &st.subjects, &st.subject_owner, Witness::Subject);
    for (s, u) in &st.subject_owner {
        cx.check(st.users.contains(u), || Witness::Subject(*s));
    }
}

fn user_labels(st: &PolicyState, cx: &mut Ctx<'_>) {
    typing_keys(cx, &st.users, &st.user_int, Witness::User);
    typing_keys(cx, &st.users, &st.user_sec, Witness::User);
}

fn subject_labels(st: &PolicyState, cx: &mut Ctx<'_>) {
    typing_keys(cx, &st.subjects, &st.subject_int, Witness::Subject);
    typing_keys(cx, &st.subjects, &st.subject_sec, Witness::Subject);
}

fn entity_labels(st: &PolicyState, cx: &mut Ctx<'_>) {
    typing_keys(cx, &st.entities, &st.entity_int, Witness::Entity);
    typing_keys(cx, &st.entities, &st.entity_sec, Witness::Entity);
}

fn entity_attributes(st: &PolicyState, cx: &mut Ctx<'_>) {
    typing_keys(cx, &st.entities, &st.entity_is_container, Witness::Entity);
    typing_keys(cx, &st.entities, &st.entity_name, Witness::Entity);
}

fn entity_parent_domain(st: &PolicyState, cx: &mut Ctx<'_>) {
    for (c, p) in &st.entity_parent {
        cx.check(st.entities.contains(c) && st.entities.contains(p), || {
            Witness::EntityPair(*c, *p)
        });
    }
}

fn role_kind(st: &PolicyState, cx: &mut Ctx<'_>) {
    typing_keys(cx, &st.roles, &st.role_kind, Witness::Role);
}

fn user_roles(st: &PolicyState, cx: &mut Ctx<'_>) {
    typing_keys(cx, &st.users, &st.user_roles, Witness::User);
    for (u, roles) in &st.user_roles {
        for r in roles {
            cx.check(st.roles.contains(r), || Witness::UserRole(*u, *r));
        }
    }
}

fn role_rights(st: &PolicyState, cx: &mut Ctx<'_>) {
    typing_keys(cx, &st.roles, &st.role_rights, Witness::Role);
    for (r, rights) in &st.role_rights {
        for (e, a) in rights {
            cx.check(st.entities.contains(e), || Witness::RoleAccess(*r, *e, *a));
        }
    }
}

fn subject_accesses(st: &PolicyState, cx: &mut Ctx<'_>) {
    typing_keys(cx, &st.subjects, &st.subject_accesses, Witness::Subject);
    for (s, set) in &st.subject_accesses {
        for (e, a) in set {
            cx.check(st.entities.contains(e), || Witness::SubjectAccess(*s, *e, *a));
        }
    }
}

fn subject_fds(st: &PolicyState, cx: &mut Ctx<'_>) {
    typing_keys(cx, &st.subjects, &st.subject_fds, Witness::Subject);
    for (s, fds) in &st.subject_fds {
        for (fd, file) in fds {
            cx.check(st.entities.contains(&file.entity), || Witness::SubjectFd(*s, *fd));
        }
    }
}

fn acyclic_hierarchy(st: &PolicyState, cx: &mut Ctx<'_>) {
    // Walk parent links from every node; a node revisited within its own walk
    // lies on a cycle. Each cycle is reported once, by its smallest member.
    let mut reported: BTreeSet<EntityId> = BTreeSet::new();
    for &start in st.entity_parent.keys() {
        let mut seen = Vec::new();
        let mut cur = start;
        let cycle = loop {
            seen.push(cur);
            match st.entity_parent.get(&cur) {
                None => break None,
                Some(&p) => match seen.iter().position(|x| *x == p) {
                    Some(pos) => break Some(seen[pos..].to_vec()),
                    None => cur = p,
                },
            }
        };
        match cycle {
            Some(members) => {
                let min = *members.iter().min().unwrap_or(&start);
                if reported.insert(min) {
                    cx.check(false, || Witness::Entity(min));
                }
            }
            None => cx.check(true, || Witness::Entity(start)),
        }
    }
}

fn parent_is_container(st: &PolicyState, cx: &mut Ctx<'_>) {
    for (c, p) in &st.entity_parent {
        cx.check(st.is_container(*p), || Witness::EntityPair(*c, *p));
    }
}

fn single_root(st: &PolicyState, cx: &mut Ctx<'_>) {
    let roots: Vec<EntityId> = st
        .entities
        .iter()
        .copied()
        .filter(|e| !st.entity_parent.contains_key(e))
        .collect();
    for (i, r) in roots.iter().enumerate() {
        cx.check(i == 0, || Witness::Entity(*r));
    }
}

fn unique_sibling_names(st: &PolicyState, cx: &mut Ctx<'_>) {
    let mut seen: BTreeMap<(EntityId, &str), EntityId> = BTreeMap::new();
    for (c, p) in &st.entity_parent {
        let name = st.entity_name.get(c).map(String::as_str).unwrap_or("");
        let first = *seen.entry((*p, name)).or_insert(*c);
        cx.check(first == *c, || Witness::EntityPair(first, *c));
    }
}

fn subject_within_user(st: &PolicyState, cx: &mut Ctx<'_>) {
    for (s, u) in &st.subject_owner {
        let int_ok = match (st.subject_int.get(s), st.user_int.get(u)) {
            (Some(si), Some(ui)) => si <= ui,
            _ => true,
        };
        let sec_ok = match (st.subject_sec.get(s), st.user_sec.get(u)) {
            (Some(sl), Some(ul)) => sl.leq(ul),
            _ => true,
        };
        cx.check(int_ok && sec_ok, || Witness::Subject(*s));
    }
}

fn held(st: &PolicyState, kind: AccessKind) -> impl Iterator<Item = (SubjectId, EntityId)> + '_ {
    st.subject_accesses.iter().flat_map(move |(s, set)| {
        set.iter()
            .filter(move |(_, a)| *a == kind)
            .map(move |(e, _)| (*s, *e))
    })
}

fn mic_write(st: &PolicyState, cx: &mut Ctx<'_>) {
    for (s, e) in held(st, AccessKind::WriteA) {
        let ok = match (st.entity_int.get(&e), st.subject_int.get(&s)) {
            (Some(ei), Some(si)) => ei <= si,
            _ => true, // typing reports the gap
        };
        cx.check(ok, || Witness::SubjectEntity(s, e));
    }
}

fn mls_read(st: &PolicyState, cx: &mut Ctx<'_>) {
    for (s, e) in held(st, AccessKind::ReadA) {
        let ok = match (st.entity_sec.get(&e), st.subject_sec.get(&s)) {
            (Some(el), Some(sl)) => el.leq(sl),
            _ => true,
        };
        cx.check(ok, || Witness::SubjectEntity(s, e));
    }
}

fn mls_write(st: &PolicyState, cx: &mut Ctx<'_>) {
    for (s, e) in held(st, AccessKind::WriteA) {
        let ok = match (st.subject_sec.get(&s), st.entity_sec.get(&e)) {
            (Some(sl), Some(el)) => sl.leq(el),
            _ => true,
        };
        cx.check(ok, || Witness::SubjectEntity(s, e));
    }
}

fn rbac(st: &PolicyState, cx: &mut Ctx<'_>) {
    for (s, set) in &st.subject_accesses {
        for (e, a) in set {
            cx.check(st.rbac_grants(*s, *e, *a), || Witness::SubjectAccess(*s, *e, *a));
        }
    }
}

fn negative_role(st: &PolicyState, cx: &mut Ctx<'_>) {
    for (s, set) in &st.subject_accesses {
        for (e, a) in set {
            cx.check(!st.forbidden(*s, *e, *a), || Witness::SubjectAccess(*s, *e, *a));
        }
    }
}

macro_rules! inv {
    ($group:ident, $name:literal, $f:ident) => {
        InvariantDescriptor {
            group: InvariantGroup::$group,
            name: $name,
            check: $f,
        }
    };
}

/// Every named invariant, in reporting order.
pub static INVARIANTS: &[InvariantDescriptor] = &[
    inv!(Typing, "subject-owner", subject_owner),
    inv!(Typing, "user-labels", user_labels),
    inv!(Typing, "subject-labels", subject_labels),
    inv!(Typing, "entity-labels", entity_labels),
    inv!(Typing, "entity-attributes", entity_attributes),
    inv!(Typing, "entity-parent-domain", entity_parent_domain),
    inv!(Typing, "role-kind", role_kind),
    inv!(Typing, "user-roles", user_roles),
    inv!(Typing, "role-rights", role_rights),
    inv!(Typing, "subject-accesses", subject_accesses),
    inv!(Typing, "subject-fds", subject_fds),
    inv!(Consistency, "acyclic-hierarchy", acyclic_hierarchy),
    inv!(Consistency, "parent-is-container", parent_is_container),
    inv!(Consistency, "single-root", single_root),
    inv!(Consistency, "unique-sibling-names", unique_sibling_names),
    inv!(Consistency, "subject-within-user", subject_within_user),
    inv!(Security, "MIC-write", mic_write),
    inv!(Security, "MLS-read", mls_read),
    inv!(Security, "MLS-write", mls_write),
    inv!(Security, "RBAC", rbac),
    inv!(Security, "negative-role", negative_role),
];

pub fn invariant_names() -> impl Iterator<Item = &'static str> {
    INVARIANTS.iter().map(|d| d.name)
}

/// Runs every invariant, recording instance counts alongside violations.
pub fn probe_invariants(state: &PolicyState) -> Probe {
    let mut probe = Probe::default();
    for d in INVARIANTS {
        let mut cx = Ctx {
            probe: &mut probe,
            group: d.group,
            name: d.name,
        };
        (d.check)(state, &mut cx);
    }
    probe
}

pub fn check_invariants(state: &PolicyState) -> Vec<Violation> {
    probe_invariants(state).violations
}
