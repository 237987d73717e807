use std::collections::{BTreeMap, BTreeSet};

use super::types::*;

/// The model's world. A plain value: operations take a state and return a
/// new one, which is what rollback relies on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicyState {
    pub users: BTreeSet<UserId>,
    /// Maximum labels a user's subjects may run with.
    pub user_int: BTreeMap<UserId, IntegrityLevel>,
    pub user_sec: BTreeMap<UserId, SecurityLabel>,
    pub user_roles: BTreeMap<UserId, BTreeSet<RoleId>>,

    pub subjects: BTreeSet<SubjectId>,
    pub subject_owner: BTreeMap<SubjectId, UserId>,
    pub subject_int: BTreeMap<SubjectId, IntegrityLevel>,
    pub subject_sec: BTreeMap<SubjectId, SecurityLabel>,
    pub subject_accesses: BTreeMap<SubjectId, BTreeSet<(EntityId, AccessKind)>>,
    /// Open descriptors. Only the syscall layer touches this map.
    pub subject_fds: BTreeMap<SubjectId, BTreeMap<Fd, OpenFile>>,

    pub entities: BTreeSet<EntityId>,
    pub entity_is_container: BTreeMap<EntityId, bool>,
    pub entity_parent: BTreeMap<EntityId, EntityId>,
    pub entity_name: BTreeMap<EntityId, String>,
    pub entity_int: BTreeMap<EntityId, IntegrityLevel>,
    pub entity_sec: BTreeMap<EntityId, SecurityLabel>,

    pub roles: BTreeSet<RoleId>,
    pub role_kind: BTreeMap<RoleId, RoleKind>,
    pub role_rights: BTreeMap<RoleId, BTreeSet<(EntityId, AccessKind)>>,
}

/// Result of resolving a slash-separated path against the entity tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    /// Some intermediate component is missing.
    MissingParent,
    /// Some intermediate component is not a container.
    ParentNotContainer,
    /// The parent resolved; the final component may or may not exist.
    Parent {
        parent: EntityId,
        target: Option<EntityId>,
    },
    /// The path names the root itself.
    Root(EntityId),
}

impl PolicyState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn owner(&self, s: SubjectId) -> Option<UserId> {
        self.subject_owner.get(&s).copied()
    }

    pub fn is_container(&self, e: EntityId) -> bool {
        self.entity_is_container.get(&e).copied().unwrap_or(false)
    }

    pub fn holds(&self, s: SubjectId, e: EntityId, a: AccessKind) -> bool {
        self.subject_accesses
            .get(&s)
            .is_some_and(|set| set.contains(&(e, a)))
    }

    fn roles_of(&self, s: SubjectId) -> impl Iterator<Item = RoleId> + '_ {
        self.owner(s)
            .and_then(|u| self.user_roles.get(&u))
            .into_iter()
            .flatten()
            .copied()
    }

    fn kind_of(&self, r: RoleId) -> Option<RoleKind> {
        self.role_kind.get(&r).copied()
    }

    fn role_has(&self, r: RoleId, e: EntityId, a: AccessKind) -> bool {
        self.role_rights
            .get(&r)
            .is_some_and(|set| set.contains(&(e, a)))
    }

    /// Some non-negative role of the subject's owner grants `(e, a)`.
    pub fn rbac_grants(&self, s: SubjectId, e: EntityId, a: AccessKind) -> bool {
        self.roles_of(s)
            .any(|r| self.kind_of(r).is_some_and(|k| k != RoleKind::Negative) && self.role_has(r, e, a))
    }

    /// Some negative role of the subject's owner lists `(e, a)`.
    pub fn forbidden(&self, s: SubjectId, e: EntityId, a: AccessKind) -> bool {
        self.roles_of(s)
            .any(|r| self.kind_of(r) == Some(RoleKind::Negative) && self.role_has(r, e, a))
    }

    /// Smallest non-negative role of the subject's owner granting `(e, a)`.
    pub fn granting_role(&self, s: SubjectId, e: EntityId, a: AccessKind) -> Option<RoleId> {
        self.roles_of(s)
            .filter(|&r| self.kind_of(r).is_some_and(|k| k != RoleKind::Negative))
            .find(|&r| self.role_has(r, e, a))
    }

    pub fn has_role_kind(&self, s: SubjectId, kind: RoleKind) -> bool {
        self.roles_of(s).any(|r| self.kind_of(r) == Some(kind))
    }

    pub fn mic_write_ok(&self, s: SubjectId, e: EntityId) -> bool {
        match (self.entity_int.get(&e), self.subject_int.get(&s)) {
            (Some(ei), Some(si)) => ei <= si,
            _ => false,
        }
    }

    pub fn mls_read_ok(&self, s: SubjectId, e: EntityId) -> bool {
        match (self.entity_sec.get(&e), self.subject_sec.get(&s)) {
            (Some(el), Some(sl)) => el.leq(sl),
            _ => false,
        }
    }

    pub fn mls_write_ok(&self, s: SubjectId, e: EntityId) -> bool {
        match (self.subject_sec.get(&s), self.entity_sec.get(&e)) {
            (Some(sl), Some(el)) => sl.leq(el),
            _ => false,
        }
    }

    /// Subjects holding `(e, a)`.
    pub fn holders(&self, e: EntityId, a: AccessKind) -> impl Iterator<Item = SubjectId> + '_ {
        self.subject_accesses
            .iter()
            .filter(move |(_, set)| set.contains(&(e, a)))
            .map(|(s, _)| *s)
    }

    pub fn any_access_on(&self, e: EntityId) -> bool {
        self.subject_accesses
            .values()
            .any(|set| set.iter().any(|(x, _)| *x == e))
    }

    pub fn any_fd_on(&self, e: EntityId) -> bool {
        self.subject_fds
            .values()
            .any(|fds| fds.values().any(|f| f.entity == e))
    }

    pub fn children(&self, parent: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        self.entity_parent
            .iter()
            .filter(move |(_, p)| **p == parent)
            .map(|(c, _)| *c)
    }

    pub fn child_named(&self, parent: EntityId, name: &str) -> Option<EntityId> {
        self.children(parent)
            .find(|c| self.entity_name.get(c).map(String::as_str) == Some(name))
    }

    /// The unique entity without a parent, if any.
    pub fn root(&self) -> Option<EntityId> {
        self.entities
            .iter()
            .copied()
            .find(|e| !self.entity_parent.contains_key(e))
    }

    /// `candidate` is `ancestor` or lies below it.
    pub fn is_descendant(&self, candidate: EntityId, ancestor: EntityId) -> bool {
        let mut cur = Some(candidate);
        let mut steps = 0;
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            steps += 1;
            if steps > self.entities.len() + 1 {
                return false;
            }
            cur = self.entity_parent.get(&c).copied();
        }
        false
    }

    pub fn resolve(&self, components: &[String]) -> Resolution {
        let Some(root) = self.root() else {
            return Resolution::MissingParent;
        };
        let Some((last, dirs)) = components.split_last() else {
            return Resolution::Root(root);
        };
        let mut cur = root;
        for comp in dirs {
            match self.child_named(cur, comp) {
                None => return Resolution::MissingParent,
                Some(next) if !self.is_container(next) => {
                    return Resolution::ParentNotContainer
                }
                Some(next) => cur = next,
            }
        }
        Resolution::Parent {
            parent: cur,
            target: self.child_named(cur, last),
        }
    }

    /// Smallest unused positive descriptor for `s`.
    pub fn next_fd(&self, s: SubjectId) -> Fd {
        let used = self.subject_fds.get(&s);
        (1..)
            .find(|fd| used.is_none_or(|m| !m.contains_key(fd)))
            .expect("descriptor space exhausted")
    }
}

/// Split an absolute path into components. Empty components are dropped.
pub fn path_components(path: &str) -> Vec<String> {
    path.split('/')
        .filter(|c| !c.is_empty())
        .map(str::to_owned)
        .collect()
}
