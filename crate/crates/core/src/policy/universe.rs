//! Bounded universes for exhaustive checking, and random argument
//! generation for randomized walks over the catalog.

use std::collections::BTreeSet;

use rand::Rng;

use super::events::{Args, EventDescriptor, Param, ParamType};
use super::invariants::check_invariants;
use super::state::PolicyState;
use super::types::*;

/// Size limits of a bounded universe.
#[derive(Debug, Clone)]
pub struct Bounds {
    pub max_subjects: usize,
    pub int_levels: u32,
    pub sec_levels: u32,
    pub categories: u32,
}

impl Default for Bounds {
    /// ≤2 subjects, ≤3 entities, 2 integrity levels, 2 security levels and
    /// one category.
    fn default() -> Self {
        Bounds {
            max_subjects: 2,
            int_levels: 2,
            sec_levels: 2,
            categories: 1,
        }
    }
}

impl Bounds {
    pub fn ints(&self) -> Vec<IntegrityLevel> {
        (0..self.int_levels).map(IntegrityLevel).collect()
    }

    pub fn top_int(&self) -> IntegrityLevel {
        IntegrityLevel(self.int_levels.saturating_sub(1))
    }

    /// Every label of the lattice.
    pub fn labels(&self) -> Vec<SecurityLabel> {
        let mut out = Vec::new();
        for level in 0..self.sec_levels {
            for mask in 0u32..(1 << self.categories) {
                let cats = (0..self.categories).filter(|c| mask & (1 << c) != 0);
                out.push(SecurityLabel::new(level, cats));
            }
        }
        out
    }

    pub fn top_label(&self) -> SecurityLabel {
        SecurityLabel::new(self.sec_levels.saturating_sub(1), 0..self.categories)
    }

    /// Bottom and top of the lattice.
    pub fn extreme_labels(&self) -> Vec<SecurityLabel> {
        vec![SecurityLabel::bottom(), self.top_label()]
    }
}

pub const ROOT: EntityId = EntityId(1);
const U1: UserId = UserId(1);
const U2: UserId = UserId(2);
const S1: SubjectId = SubjectId(1);
const S2: SubjectId = SubjectId(2);
/// Ordinary role of user 1.
pub const R_ORD1: RoleId = RoleId(1);
/// Ordinary role of user 2.
pub const R_ORD2: RoleId = RoleId(2);
/// Negative role of user 2.
pub const R_NEG: RoleId = RoleId(3);
/// Administrative role of user 1.
pub const R_ADMIN: RoleId = RoleId(4);

/// Entity tree shapes with at most three entities: (id, parent, name, dir).
const SHAPES: &[&[(u64, u64, &str, bool)]] = &[
    &[],
    &[(2, 1, "a", false)],
    &[(2, 1, "a", true)],
    &[(2, 1, "a", true), (3, 2, "b", false)],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rights {
    None,
    ReadAll,
    All,
}

fn skeleton(bounds: &Bounds) -> PolicyState {
    let mut st = PolicyState::empty();
    for u in [U1, U2] {
        st.users.insert(u);
        st.user_int.insert(u, bounds.top_int());
        st.user_sec.insert(u, bounds.top_label());
    }
    for (r, k) in [
        (R_ORD1, RoleKind::Ordinary),
        (R_ORD2, RoleKind::Ordinary),
        (R_NEG, RoleKind::Negative),
        (R_ADMIN, RoleKind::Administrative),
    ] {
        st.roles.insert(r);
        st.role_kind.insert(r, k);
        st.role_rights.insert(r, BTreeSet::new());
    }
    st.user_roles.insert(U1, [R_ORD1, R_ADMIN].into());
    st.user_roles.insert(U2, [R_ORD2, R_NEG].into());
    st
}

fn add_entity(
    st: &mut PolicyState,
    e: EntityId,
    parent: Option<EntityId>,
    name: &str,
    dir: bool,
    label: &(IntegrityLevel, SecurityLabel),
) {
    st.entities.insert(e);
    if let Some(p) = parent {
        st.entity_parent.insert(e, p);
    }
    st.entity_name.insert(e, name.to_owned());
    st.entity_is_container.insert(e, dir);
    st.entity_int.insert(e, label.0);
    st.entity_sec.insert(e, label.1.clone());
}

fn add_subject(
    st: &mut PolicyState,
    s: SubjectId,
    u: UserId,
    label: &(IntegrityLevel, SecurityLabel),
) {
    st.subjects.insert(s);
    st.subject_owner.insert(s, u);
    st.subject_int.insert(s, label.0);
    st.subject_sec.insert(s, label.1.clone());
    st.subject_accesses.insert(s, BTreeSet::new());
    st.subject_fds.insert(s, Default::default());
}

fn grant(st: &mut PolicyState, r: RoleId, rights: Rights) {
    let entities: Vec<EntityId> = st.entities.iter().copied().collect();
    let set = st.role_rights.entry(r).or_default();
    for e in entities {
        match rights {
            Rights::None => {}
            Rights::ReadAll => {
                set.insert((e, AccessKind::ReadA));
            }
            Rights::All => {
                set.insert((e, AccessKind::ReadA));
                set.insert((e, AccessKind::WriteA));
            }
        }
    }
}

/// Hands every subject every access it may lawfully hold, plus a descriptor
/// on entity 2 when it is a file and something is held on it.
fn saturate(st: &mut PolicyState) {
    let subjects: Vec<SubjectId> = st.subjects.iter().copied().collect();
    let entities: Vec<EntityId> = st.entities.iter().copied().collect();
    for &s in &subjects {
        for &e in &entities {
            for a in [AccessKind::ReadA, AccessKind::WriteA] {
                let lawful = st.rbac_grants(s, e, a)
                    && !st.forbidden(s, e, a)
                    && match a {
                        AccessKind::ReadA => st.mls_read_ok(s, e),
                        _ => st.mic_write_ok(s, e) && st.mls_write_ok(s, e),
                    };
                if lawful {
                    st.subject_accesses.entry(s).or_default().insert((e, a));
                }
            }
        }
        let file = EntityId(2);
        if st.entities.contains(&file) && !st.is_container(file) {
            let kinds: BTreeSet<AccessKind> = st.subject_accesses[&s]
                .iter()
                .filter(|(e, _)| *e == file)
                .map(|(_, a)| *a)
                .collect();
            if !kinds.is_empty() {
                st.subject_fds.entry(s).or_default().insert(
                    1,
                    OpenFile {
                        entity: file,
                        kinds,
                    },
                );
            }
        }
    }
}

/// All secure states of the bounded universe. Every returned state passes
/// `check_invariants`.
///
/// Dimensions: four tree shapes (≤3 entities); root labelled bottom or top;
/// other entities over {0,top int} × {bottom,top label}; subject 1 over all
/// integrity levels × all labels; subject 2 absent, bottom or top; rights of
/// the two ordinary roles and of the negative role; no accesses held or
/// every lawful access held.
pub fn secure_states(bounds: &Bounds) -> Vec<PolicyState> {
    let int_ext = [IntegrityLevel(0), bounds.top_int()];
    let entity_labels: Vec<(IntegrityLevel, SecurityLabel)> = int_ext
        .iter()
        .flat_map(|i| bounds.extreme_labels().into_iter().map(move |l| (*i, l)))
        .collect();
    let root_labels = [
        (IntegrityLevel(0), SecurityLabel::bottom()),
        (bounds.top_int(), bounds.top_label()),
    ];
    let s1_labels: Vec<(IntegrityLevel, SecurityLabel)> = bounds
        .ints()
        .into_iter()
        .flat_map(|i| bounds.labels().into_iter().map(move |l| (i, l)))
        .collect();
    let mut s2_options: Vec<Option<(IntegrityLevel, SecurityLabel)>> = vec![None];
    if bounds.max_subjects >= 2 {
        s2_options.push(Some((IntegrityLevel(0), SecurityLabel::bottom())));
        s2_options.push(Some((bounds.top_int(), bounds.top_label())));
    }

    let mut out = Vec::new();
    for shape in SHAPES {
        // Label assignments for the non-root entities of this shape.
        let mut assignments: Vec<Vec<(IntegrityLevel, SecurityLabel)>> = vec![vec![]];
        for _ in shape.iter() {
            assignments = assignments
                .into_iter()
                .flat_map(|prefix| {
                    entity_labels.iter().map(move |l| {
                        let mut v = prefix.clone();
                        v.push(l.clone());
                        v
                    })
                })
                .collect();
        }
        for root_label in &root_labels {
            for labels in &assignments {
                let mut base = skeleton(bounds);
                add_entity(&mut base, ROOT, None, "", true, root_label);
                for ((id, parent, name, dir), label) in shape.iter().zip(labels) {
                    add_entity(&mut base, EntityId(*id), Some(EntityId(*parent)), name, *dir, label);
                }
                for s1 in &s1_labels {
                    for s2 in &s2_options {
                        for r1 in [Rights::None, Rights::ReadAll, Rights::All] {
                            for r2 in [Rights::None, Rights::All] {
                                if s2.is_none() && r2 != Rights::None {
                                    continue;
                                }
                                for neg in [false, true] {
                                    if s2.is_none() && neg {
                                        continue;
                                    }
                                    let mut st = base.clone();
                                    add_subject(&mut st, S1, U1, s1);
                                    if let Some(l) = s2 {
                                        add_subject(&mut st, S2, U2, l);
                                    }
                                    grant(&mut st, R_ORD1, r1);
                                    grant(&mut st, R_ORD2, r2);
                                    if neg {
                                        let ents: Vec<_> = st.entities.iter().copied().collect();
                                        let set = st.role_rights.get_mut(&R_NEG).unwrap();
                                        for e in ents {
                                            set.insert((e, AccessKind::WriteA));
                                        }
                                    }
                                    out.push(st.clone());
                                    saturate(&mut st);
                                    if out.last() != Some(&st) {
                                        out.push(st);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert!(out.iter().all(|s| check_invariants(s).is_empty()));
    out
}

/// Argument domains for exhaustive event enumeration. Ids range one past the
/// universe so that fresh-id cases are covered.
#[derive(Debug, Clone)]
pub struct ParamDomains {
    pub users: Vec<UserId>,
    pub subjects: Vec<SubjectId>,
    pub entities: Vec<EntityId>,
    pub roles: Vec<RoleId>,
    pub ints: Vec<IntegrityLevel>,
    pub labels: Vec<SecurityLabel>,
    pub names: Vec<String>,
}

impl ParamDomains {
    pub fn for_bounds(bounds: &Bounds) -> Self {
        ParamDomains {
            users: (1..=3).map(UserId).collect(),
            subjects: (1..=3).map(SubjectId).collect(),
            entities: (1..=4).map(EntityId).collect(),
            roles: (1..=5).map(RoleId).collect(),
            ints: bounds.ints(),
            labels: bounds.labels(),
            names: vec!["a".into(), "b".into(), "c".into()],
        }
    }

    fn values(&self, ty: ParamType) -> Vec<Param> {
        match ty {
            ParamType::User => self.users.iter().map(|x| Param::User(*x)).collect(),
            ParamType::Subject => self.subjects.iter().map(|x| Param::Subject(*x)).collect(),
            ParamType::Entity => self.entities.iter().map(|x| Param::Entity(*x)).collect(),
            ParamType::OptEntity => std::iter::once(Param::OptEntity(None))
                .chain(self.entities.iter().map(|x| Param::OptEntity(Some(*x))))
                .collect(),
            ParamType::Role => self.roles.iter().map(|x| Param::Role(*x)).collect(),
            ParamType::Int => self.ints.iter().map(|x| Param::Int(*x)).collect(),
            ParamType::Sec => self.labels.iter().map(|x| Param::Sec(x.clone())).collect(),
            ParamType::Access => AccessKind::ALL.iter().map(|x| Param::Access(*x)).collect(),
            ParamType::Kind => RoleKind::ALL.iter().map(|x| Param::Kind(*x)).collect(),
            ParamType::Name => self.names.iter().map(|x| Param::Name(x.clone())).collect(),
        }
    }

    /// Cartesian product of the domains of `desc`'s parameters.
    pub fn all_args(&self, desc: &EventDescriptor) -> Vec<Args> {
        let mut out: Vec<Vec<Param>> = vec![vec![]];
        for (_, ty) in &desc.params {
            let vals = self.values(*ty);
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(Args).collect()
    }
}

fn pick_existing<T: Copy, R: Rng>(rng: &mut R, pool: &BTreeSet<T>, fresh: T) -> T {
    // Mostly existing ids so that guards pass often; fresh ids sometimes.
    if pool.is_empty() || rng.random_bool(0.2) {
        fresh
    } else {
        *pool.iter().nth(rng.random_range(0..pool.len())).unwrap()
    }
}

/// Random arguments for `desc`, biased toward ids that exist in `state`.
pub fn random_args<R: Rng>(
    rng: &mut R,
    desc: &EventDescriptor,
    state: &PolicyState,
    bounds: &Bounds,
) -> Args {
    let labels = bounds.labels();
    let names = ["a", "b", "c", "d"];
    let mut out = Vec::with_capacity(desc.params.len());
    for (_, ty) in &desc.params {
        let p = match ty {
            ParamType::User => {
                let f = UserId(state.users.iter().last().map_or(1, |u| u.0 + 1));
                Param::User(pick_existing(rng, &state.users, f))
            }
            ParamType::Subject => {
                let f = SubjectId(state.subjects.iter().last().map_or(1, |s| s.0 + 1));
                Param::Subject(pick_existing(rng, &state.subjects, f))
            }
            ParamType::Entity => {
                let f = EntityId(state.entities.iter().last().map_or(1, |e| e.0 + 1));
                Param::Entity(pick_existing(rng, &state.entities, f))
            }
            ParamType::OptEntity => {
                if rng.random_bool(0.1) {
                    Param::OptEntity(None)
                } else {
                    let f = EntityId(state.entities.iter().last().map_or(1, |e| e.0 + 1));
                    Param::OptEntity(Some(pick_existing(rng, &state.entities, f)))
                }
            }
            ParamType::Role => {
                let f = RoleId(state.roles.iter().last().map_or(1, |r| r.0 + 1));
                Param::Role(pick_existing(rng, &state.roles, f))
            }
            ParamType::Int => Param::Int(IntegrityLevel(rng.random_range(0..bounds.int_levels))),
            ParamType::Sec => Param::Sec(labels[rng.random_range(0..labels.len())].clone()),
            ParamType::Access => Param::Access(AccessKind::ALL[rng.random_range(0..3)]),
            ParamType::Kind => Param::Kind(RoleKind::ALL[rng.random_range(0..3)]),
            ParamType::Name => Param::Name(names[rng.random_range(0..names.len())].to_owned()),
        };
        out.push(p);
    }
    Args(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_has_four_labels() {
        assert_eq!(Bounds::default().labels().len(), 4);
    }

    #[test]
    fn secure_states_are_secure_and_bounded() {
        let b = Bounds::default();
        let states = secure_states(&b);
        assert!(states.len() > 1000);
        for st in &states {
            assert!(st.subjects.len() <= 2);
            assert!(st.entities.len() <= 3);
            assert!(check_invariants(st).is_empty());
        }
    }
}
