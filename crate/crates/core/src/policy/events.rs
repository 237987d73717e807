//! Catalog of guarded primitive events. Each event has a typed parameter
//! signature, a guard made of named conjuncts, and an action that is only run
//! when every conjunct holds.

use std::fmt;
use std::sync::LazyLock;

use thiserror::Error;

use super::state::PolicyState;
use super::types::*;

/// Bumped whenever catalog membership or a signature changes.
pub const CATALOG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    User,
    Subject,
    Entity,
    OptEntity,
    Role,
    Int,
    Sec,
    Access,
    Kind,
    Name,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Param {
    User(UserId),
    Subject(SubjectId),
    Entity(EntityId),
    OptEntity(Option<EntityId>),
    Role(RoleId),
    Int(IntegrityLevel),
    Sec(SecurityLabel),
    Access(AccessKind),
    Kind(RoleKind),
    Name(String),
}

impl Param {
    pub fn ty(&self) -> ParamType {
        match self {
            Param::User(_) => ParamType::User,
            Param::Subject(_) => ParamType::Subject,
            Param::Entity(_) => ParamType::Entity,
            Param::OptEntity(_) => ParamType::OptEntity,
            Param::Role(_) => ParamType::Role,
            Param::Int(_) => ParamType::Int,
            Param::Sec(_) => ParamType::Sec,
            Param::Access(_) => ParamType::Access,
            Param::Kind(_) => ParamType::Kind,
            Param::Name(_) => ParamType::Name,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::User(x) => x.fmt(f),
            Param::Subject(x) => x.fmt(f),
            Param::Entity(x) => x.fmt(f),
            Param::OptEntity(Some(x)) => x.fmt(f),
            Param::OptEntity(None) => f.write_str("none"),
            Param::Role(x) => x.fmt(f),
            Param::Int(x) => x.fmt(f),
            Param::Sec(x) => x.fmt(f),
            Param::Access(x) => x.fmt(f),
            Param::Kind(x) => write!(f, "{x:?}"),
            Param::Name(x) => write!(f, "{x:?}"),
        }
    }
}

/// Positional event arguments. Accessors assume the signature was checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Args(pub Vec<Param>);

macro_rules! accessor {
    ($fn:ident, $variant:ident, $ty:ty) => {
        pub fn $fn(&self, i: usize) -> $ty {
            match &self.0[i] {
                Param::$variant(x) => x.clone(),
                other => panic!("argument {i} is {other:?}, not {}", stringify!($variant)),
            }
        }
    };
}

impl Args {
    accessor!(user, User, UserId);
    accessor!(subject, Subject, SubjectId);
    accessor!(entity, Entity, EntityId);
    accessor!(opt_entity, OptEntity, Option<EntityId>);
    accessor!(role, Role, RoleId);
    accessor!(int, Int, IntegrityLevel);
    accessor!(sec, Sec, SecurityLabel);
    accessor!(access, Access, AccessKind);
    accessor!(kind, Kind, RoleKind);
    accessor!(name, Name, String);
}

impl From<Vec<Param>> for Args {
    fn from(v: Vec<Param>) -> Self {
        Args(v)
    }
}

pub type Predicate = fn(&PolicyState, &Args) -> bool;
pub type Action = fn(&mut PolicyState, &Args);

pub struct GuardConjunct {
    pub name: &'static str,
    pub holds: Predicate,
}

pub struct EventDescriptor {
    pub name: &'static str,
    pub params: Vec<(&'static str, ParamType)>,
    pub guard: Vec<GuardConjunct>,
    action: Action,
}

impl EventDescriptor {
    pub fn check_signature(&self, args: &Args) -> Result<(), EventError> {
        if args.0.len() != self.params.len() {
            return Err(EventError::ArityMismatch {
                event: self.name.to_owned(),
                expected: self.params.len(),
                got: args.0.len(),
            });
        }
        for (i, (p, (pname, ty))) in args.0.iter().zip(&self.params).enumerate() {
            if p.ty() != *ty {
                return Err(EventError::TypeMismatch {
                    event: self.name.to_owned(),
                    index: i,
                    param: pname,
                });
            }
        }
        Ok(())
    }

    /// Name of the first conjunct that fails, if any.
    pub fn first_failure(&self, state: &PolicyState, args: &Args) -> Option<&'static str> {
        self.guard
            .iter()
            .find(|c| !(c.holds)(state, args))
            .map(|c| c.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("event `{event}` takes {expected} arguments, got {got}")]
    ArityMismatch {
        event: String,
        expected: usize,
        got: usize,
    },
    #[error("event `{event}`: argument {index} (`{param}`) has the wrong type")]
    TypeMismatch {
        event: String,
        index: usize,
        param: &'static str,
    },
    #[error("event `{event}`: guard `{conjunct}` does not hold")]
    GuardFailure {
        event: String,
        conjunct: &'static str,
    },
}

pub fn lookup(name: &str) -> Result<&'static EventDescriptor, EventError> {
    CATALOG
        .iter()
        .find(|d| d.name == name)
        .ok_or_else(|| EventError::UnknownEvent(name.to_owned()))
}

pub fn enabled(state: &PolicyState, event: &str, args: &Args) -> Result<bool, EventError> {
    let d = lookup(event)?;
    d.check_signature(args)?;
    Ok(d.first_failure(state, args).is_none())
}

/// Applies `event` to a copy of `state`. The input is never modified.
pub fn apply_event(
    state: &PolicyState,
    event: &str,
    args: &Args,
) -> Result<PolicyState, EventError> {
    let d = lookup(event)?;
    d.check_signature(args)?;
    if let Some(conjunct) = d.first_failure(state, args) {
        return Err(EventError::GuardFailure {
            event: d.name.to_owned(),
            conjunct,
        });
    }
    let mut next = state.clone();
    (d.action)(&mut next, args);
    Ok(next)
}

/// Applies `event` in place; on error `state` is untouched.
pub fn apply_event_mut(
    state: &mut PolicyState,
    event: &str,
    args: &Args,
) -> Result<(), EventError> {
    let d = lookup(event)?;
    d.check_signature(args)?;
    if let Some(conjunct) = d.first_failure(state, args) {
        return Err(EventError::GuardFailure {
            event: d.name.to_owned(),
            conjunct,
        });
    }
    (d.action)(state, args);
    Ok(())
}

// Shared guard fragments.

fn name_valid(parent: Option<EntityId>, name: &str) -> bool {
    match parent {
        None => true,
        Some(_) => !name.is_empty() && !name.contains('/'),
    }
}

fn name_free(st: &PolicyState, parent: EntityId, name: &str, except: Option<EntityId>) -> bool {
    match st.child_named(parent, name) {
        None => true,
        Some(c) => Some(c) == except,
    }
}

fn subjects_of(st: &PolicyState, u: UserId) -> impl Iterator<Item = SubjectId> + '_ {
    st.subject_owner
        .iter()
        .filter(move |(_, o)| **o == u)
        .map(|(s, _)| *s)
}

/// Every access held by a subject of a user holding `r` is still granted and
/// not forbidden once `mutate` has been applied.
fn accesses_stay_lawful(st: &PolicyState, mutate: impl FnOnce(&mut PolicyState)) -> bool {
    let mut after = st.clone();
    mutate(&mut after);
    after.subject_accesses.iter().all(|(s, set)| {
        set.iter()
            .all(|(e, a)| after.rbac_grants(*s, *e, *a) && !after.forbidden(*s, *e, *a))
    })
}

fn int_compatible(st: &PolicyState, e: EntityId, int: IntegrityLevel) -> bool {
    st.holders(e, AccessKind::WriteA)
        .all(|s| st.subject_int.get(&s).is_some_and(|si| int <= *si))
}

fn sec_compatible(st: &PolicyState, e: EntityId, sec: &SecurityLabel) -> bool {
    st.holders(e, AccessKind::WriteA)
        .all(|s| st.subject_sec.get(&s).is_some_and(|sl| sl.leq(sec)))
        && st
            .holders(e, AccessKind::ReadA)
            .all(|s| st.subject_sec.get(&s).is_some_and(|sl| sec.leq(sl)))
}

fn insert_entity(
    st: &mut PolicyState,
    e: EntityId,
    parent: Option<EntityId>,
    name: String,
    container: bool,
    int: IntegrityLevel,
    sec: SecurityLabel,
) {
    st.entities.insert(e);
    if let Some(p) = parent {
        st.entity_parent.insert(e, p);
    }
    st.entity_name.insert(e, name);
    st.entity_is_container.insert(e, container);
    st.entity_int.insert(e, int);
    st.entity_sec.insert(e, sec);
}

macro_rules! conj {
    ($name:literal, $f:expr) => {
        GuardConjunct {
            name: $name,
            holds: $f,
        }
    };
}

use ParamType as T;

/// The event catalog.
pub static CATALOG: LazyLock<Vec<EventDescriptor>> = LazyLock::new(build_catalog);

fn build_catalog() -> Vec<EventDescriptor> {
    vec![
        EventDescriptor {
            name: "create_user",
            params: vec![("u", T::User), ("int", T::Int), ("sec", T::Sec)],
            guard: vec![conj!("user_fresh", |st, a| !st.users.contains(&a.user(0)))],
            action: |st, a| {
                let u = a.user(0);
                st.users.insert(u);
                st.user_int.insert(u, a.int(1));
                st.user_sec.insert(u, a.sec(2));
                st.user_roles.insert(u, Default::default());
            },
        },
        EventDescriptor {
            name: "delete_user",
            params: vec![("u", T::User)],
            guard: vec![
                conj!("user_exists", |st, a| st.users.contains(&a.user(0))),
                conj!("user_has_no_subjects", |st, a| subjects_of(st, a.user(0))
                    .next()
                    .is_none()),
            ],
            action: |st, a| {
                let u = a.user(0);
                st.users.remove(&u);
                st.user_int.remove(&u);
                st.user_sec.remove(&u);
                st.user_roles.remove(&u);
            },
        },
        EventDescriptor {
            name: "create_subject",
            params: vec![
                ("s", T::Subject),
                ("u", T::User),
                ("int", T::Int),
                ("sec", T::Sec),
            ],
            guard: vec![
                conj!("subject_fresh", |st, a| !st.subjects.contains(&a.subject(0))),
                conj!("owner_exists", |st, a| st.users.contains(&a.user(1))),
                conj!("int_within_owner", |st, a| st
                    .user_int
                    .get(&a.user(1))
                    .is_some_and(|ui| a.int(2) <= *ui)),
                conj!("sec_within_owner", |st, a| st
                    .user_sec
                    .get(&a.user(1))
                    .is_some_and(|ul| a.sec(3).leq(ul))),
            ],
            action: |st, a| {
                let s = a.subject(0);
                st.subjects.insert(s);
                st.subject_owner.insert(s, a.user(1));
                st.subject_int.insert(s, a.int(2));
                st.subject_sec.insert(s, a.sec(3));
                st.subject_accesses.insert(s, Default::default());
                st.subject_fds.insert(s, Default::default());
            },
        },
        EventDescriptor {
            name: "delete_subject",
            params: vec![("s", T::Subject)],
            guard: vec![conj!("subject_exists", |st, a| st
                .subjects
                .contains(&a.subject(0)))],
            action: |st, a| {
                let s = a.subject(0);
                st.subjects.remove(&s);
                st.subject_owner.remove(&s);
                st.subject_int.remove(&s);
                st.subject_sec.remove(&s);
                st.subject_accesses.remove(&s);
                st.subject_fds.remove(&s);
            },
        },
        EventDescriptor {
            name: "create_object",
            params: vec![
                ("e", T::Entity),
                ("parent", T::Entity),
                ("name", T::Name),
                ("int", T::Int),
                ("sec", T::Sec),
            ],
            guard: vec![
                conj!("entity_fresh", |st, a| !st.entities.contains(&a.entity(0))),
                conj!("parent_exists", |st, a| st.entities.contains(&a.entity(1))),
                conj!("parent_is_container", |st, a| st.is_container(a.entity(1))),
                conj!("name_valid", |_, a| name_valid(Some(a.entity(1)), &a.name(2))),
                conj!("name_free", |st, a| name_free(st, a.entity(1), &a.name(2), None)),
            ],
            action: |st, a| {
                insert_entity(
                    st,
                    a.entity(0),
                    Some(a.entity(1)),
                    a.name(2),
                    false,
                    a.int(3),
                    a.sec(4),
                )
            },
        },
        EventDescriptor {
            name: "create_container",
            params: vec![
                ("e", T::Entity),
                ("parent", T::OptEntity),
                ("name", T::Name),
                ("int", T::Int),
                ("sec", T::Sec),
            ],
            guard: vec![
                conj!("entity_fresh", |st, a| !st.entities.contains(&a.entity(0))),
                conj!("parent_ok", |st, a| match a.opt_entity(1) {
                    None => st.root().is_none(),
                    Some(p) => st.entities.contains(&p) && st.is_container(p),
                }),
                conj!("name_valid", |_, a| name_valid(a.opt_entity(1), &a.name(2))),
                conj!("name_free", |st, a| match a.opt_entity(1) {
                    None => true,
                    Some(p) => name_free(st, p, &a.name(2), None),
                }),
            ],
            action: |st, a| {
                insert_entity(
                    st,
                    a.entity(0),
                    a.opt_entity(1),
                    a.name(2),
                    true,
                    a.int(3),
                    a.sec(4),
                )
            },
        },
        EventDescriptor {
            name: "delete_entity",
            params: vec![("e", T::Entity)],
            guard: vec![
                conj!("entity_exists", |st, a| st.entities.contains(&a.entity(0))),
                conj!("no_children", |st, a| st.children(a.entity(0)).next().is_none()),
                conj!("no_accesses_held", |st, a| !st.any_access_on(a.entity(0))),
                conj!("no_open_fds", |st, a| !st.any_fd_on(a.entity(0))),
            ],
            action: |st, a| {
                let e = a.entity(0);
                st.entities.remove(&e);
                st.entity_parent.remove(&e);
                st.entity_name.remove(&e);
                st.entity_is_container.remove(&e);
                st.entity_int.remove(&e);
                st.entity_sec.remove(&e);
                for rights in st.role_rights.values_mut() {
                    rights.retain(|(x, _)| *x != e);
                }
            },
        },
        EventDescriptor {
            name: "rename_entity",
            params: vec![("e", T::Entity), ("parent", T::Entity), ("name", T::Name)],
            guard: vec![
                conj!("entity_exists", |st, a| st.entities.contains(&a.entity(0))),
                conj!("parent_exists", |st, a| st.entities.contains(&a.entity(1))),
                conj!("parent_is_container", |st, a| st.is_container(a.entity(1))),
                conj!("not_into_itself", |st, a| !st.is_descendant(a.entity(1), a.entity(0))),
                conj!("name_valid", |_, a| name_valid(Some(a.entity(1)), &a.name(2))),
                conj!("name_free", |st, a| name_free(
                    st,
                    a.entity(1),
                    &a.name(2),
                    Some(a.entity(0))
                )),
            ],
            action: |st, a| {
                let e = a.entity(0);
                st.entity_parent.insert(e, a.entity(1));
                st.entity_name.insert(e, a.name(2));
            },
        },
        EventDescriptor {
            name: "create_role",
            params: vec![("r", T::Role), ("kind", T::Kind)],
            guard: vec![conj!("role_fresh", |st, a| !st.roles.contains(&a.role(0)))],
            action: |st, a| {
                let r = a.role(0);
                st.roles.insert(r);
                st.role_kind.insert(r, a.kind(1));
                st.role_rights.insert(r, Default::default());
            },
        },
        EventDescriptor {
            name: "delete_role",
            params: vec![("r", T::Role)],
            guard: vec![
                conj!("role_exists", |st, a| st.roles.contains(&a.role(0))),
                conj!("role_unassigned", |st, a| !st
                    .user_roles
                    .values()
                    .any(|rs| rs.contains(&a.role(0)))),
            ],
            action: |st, a| {
                let r = a.role(0);
                st.roles.remove(&r);
                st.role_kind.remove(&r);
                st.role_rights.remove(&r);
            },
        },
        EventDescriptor {
            name: "assign_role",
            params: vec![("u", T::User), ("r", T::Role)],
            guard: vec![
                conj!("user_exists", |st, a| st.users.contains(&a.user(0))),
                conj!("role_exists", |st, a| st.roles.contains(&a.role(1))),
                conj!("accesses_stay_lawful", |st, a| accesses_stay_lawful(st, |t| {
                    t.user_roles.entry(a.user(0)).or_default().insert(a.role(1));
                })),
            ],
            action: |st, a| {
                st.user_roles.entry(a.user(0)).or_default().insert(a.role(1));
            },
        },
        EventDescriptor {
            name: "revoke_role",
            params: vec![("u", T::User), ("r", T::Role)],
            guard: vec![
                conj!("user_exists", |st, a| st.users.contains(&a.user(0))),
                conj!("role_assigned", |st, a| st
                    .user_roles
                    .get(&a.user(0))
                    .is_some_and(|rs| rs.contains(&a.role(1)))),
                conj!("accesses_stay_lawful", |st, a| accesses_stay_lawful(st, |t| {
                    if let Some(rs) = t.user_roles.get_mut(&a.user(0)) {
                        rs.remove(&a.role(1));
                    }
                })),
            ],
            action: |st, a| {
                if let Some(rs) = st.user_roles.get_mut(&a.user(0)) {
                    rs.remove(&a.role(1));
                }
            },
        },
        EventDescriptor {
            name: "grant_rights",
            params: vec![("r", T::Role), ("e", T::Entity), ("a", T::Access)],
            guard: vec![
                conj!("role_exists", |st, a| st.roles.contains(&a.role(0))),
                conj!("entity_exists", |st, a| st.entities.contains(&a.entity(1))),
                conj!("accesses_stay_lawful", |st, a| {
                    // Only a negative role can make a held access unlawful.
                    st.role_kind.get(&a.role(0)) != Some(&RoleKind::Negative)
                        || accesses_stay_lawful(st, |t| {
                            t.role_rights
                                .entry(a.role(0))
                                .or_default()
                                .insert((a.entity(1), a.access(2)));
                        })
                }),
            ],
            action: |st, a| {
                st.role_rights
                    .entry(a.role(0))
                    .or_default()
                    .insert((a.entity(1), a.access(2)));
            },
        },
        EventDescriptor {
            name: "revoke_rights",
            params: vec![("r", T::Role), ("e", T::Entity), ("a", T::Access)],
            guard: vec![
                conj!("right_present", |st, a| st
                    .role_rights
                    .get(&a.role(0))
                    .is_some_and(|rs| rs.contains(&(a.entity(1), a.access(2))))),
                conj!("accesses_stay_lawful", |st, a| accesses_stay_lawful(st, |t| {
                    if let Some(rs) = t.role_rights.get_mut(&a.role(0)) {
                        rs.remove(&(a.entity(1), a.access(2)));
                    }
                })),
            ],
            action: |st, a| {
                if let Some(rs) = st.role_rights.get_mut(&a.role(0)) {
                    rs.remove(&(a.entity(1), a.access(2)));
                }
            },
        },
        EventDescriptor {
            name: "access_read_entity",
            params: vec![("s", T::Subject), ("e", T::Entity)],
            guard: vec![
                conj!("subject_exists", |st, a| st.subjects.contains(&a.subject(0))),
                conj!("entity_exists", |st, a| st.entities.contains(&a.entity(1))),
                conj!("rbac_granted", |st, a| st.rbac_grants(
                    a.subject(0),
                    a.entity(1),
                    AccessKind::ReadA
                )),
                conj!("not_forbidden", |st, a| !st.forbidden(
                    a.subject(0),
                    a.entity(1),
                    AccessKind::ReadA
                )),
                conj!("mls_read", |st, a| st.mls_read_ok(a.subject(0), a.entity(1))),
            ],
            action: |st, a| {
                st.subject_accesses
                    .entry(a.subject(0))
                    .or_default()
                    .insert((a.entity(1), AccessKind::ReadA));
            },
        },
        EventDescriptor {
            name: "access_write_entity",
            params: vec![("s", T::Subject), ("e", T::Entity)],
            guard: vec![
                conj!("subject_exists", |st, a| st.subjects.contains(&a.subject(0))),
                conj!("entity_exists", |st, a| st.entities.contains(&a.entity(1))),
                conj!("rbac_granted", |st, a| st.rbac_grants(
                    a.subject(0),
                    a.entity(1),
                    AccessKind::WriteA
                )),
                conj!("not_forbidden", |st, a| !st.forbidden(
                    a.subject(0),
                    a.entity(1),
                    AccessKind::WriteA
                )),
                conj!("mic_write", |st, a| st.mic_write_ok(a.subject(0), a.entity(1))),
                conj!("mls_write", |st, a| st.mls_write_ok(a.subject(0), a.entity(1))),
            ],
            action: |st, a| {
                st.subject_accesses
                    .entry(a.subject(0))
                    .or_default()
                    .insert((a.entity(1), AccessKind::WriteA));
            },
        },
        EventDescriptor {
            name: "release_access",
            params: vec![("s", T::Subject), ("e", T::Entity), ("a", T::Access)],
            guard: vec![
                conj!("subject_exists", |st, a| st.subjects.contains(&a.subject(0))),
                conj!("access_held", |st, a| st.holds(
                    a.subject(0),
                    a.entity(1),
                    a.access(2)
                )),
            ],
            action: |st, a| {
                if let Some(set) = st.subject_accesses.get_mut(&a.subject(0)) {
                    set.remove(&(a.entity(1), a.access(2)));
                }
            },
        },
        EventDescriptor {
            name: "set_entity_int",
            params: vec![("e", T::Entity), ("int", T::Int)],
            guard: vec![
                conj!("entity_exists", |st, a| st.entities.contains(&a.entity(0))),
                conj!("int_compatible", |st, a| int_compatible(st, a.entity(0), a.int(1))),
            ],
            action: |st, a| {
                st.entity_int.insert(a.entity(0), a.int(1));
            },
        },
        EventDescriptor {
            name: "set_entity_sec",
            params: vec![("e", T::Entity), ("sec", T::Sec)],
            guard: vec![
                conj!("entity_exists", |st, a| st.entities.contains(&a.entity(0))),
                conj!("sec_compatible", |st, a| sec_compatible(st, a.entity(0), &a.sec(1))),
            ],
            action: |st, a| {
                st.entity_sec.insert(a.entity(0), a.sec(1));
            },
        },
    ]
}

pub fn event_names() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|d| d.name)
}

/// Compatibility of a relabel with every held access; shared with the
/// syscall layer so its guards agree with the catalog by construction.
pub fn relabel_int_ok(st: &PolicyState, e: EntityId, int: IntegrityLevel) -> bool {
    int_compatible(st, e, int)
}

pub fn relabel_sec_ok(st: &PolicyState, e: EntityId, sec: &SecurityLabel) -> bool {
    sec_compatible(st, e, sec)
}
