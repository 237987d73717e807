use std::collections::{BTreeMap, BTreeSet};

use crate::policy::{
    check_invariants, AccessKind, EntityId, IntegrityLevel, OpenFile, PolicyState, RoleId,
    SubjectId, UserId,
};

use super::format::{
    KernelSnapshot, SnapshotAccess, SnapshotFd, SnapshotFile, SnapshotProcess, SnapshotRole,
    SnapshotUser,
};
use super::TraceError;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Bijection<M: Ord + Copy> {
    to_model: BTreeMap<u64, M>,
    to_kernel: BTreeMap<M, u64>,
}

impl<M: Ord + Copy> Default for Bijection<M> {
    fn default() -> Self {
        Bijection {
            to_model: BTreeMap::new(),
            to_kernel: BTreeMap::new(),
        }
    }
}

impl<M: Ord + Copy> Bijection<M> {
    fn insert(&mut self, k: u64, m: M) -> bool {
        if self.to_model.contains_key(&k) || self.to_kernel.contains_key(&m) {
            return false;
        }
        self.to_model.insert(k, m);
        self.to_kernel.insert(m, k);
        true
    }

    fn is_bijective(&self) -> bool {
        self.to_model.len() == self.to_kernel.len()
            && self.to_model.iter().all(|(k, m)| self.to_kernel.get(m) == Some(k))
    }
}

/// Correspondence between kernel identifiers and model identifiers. Kernel
/// ids keep their numeric value, but every translation goes through the map
/// so an id the snapshot never declared is caught.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    users: Bijection<UserId>,
    subjects: Bijection<SubjectId>,
    entities: Bijection<EntityId>,
    roles: Bijection<RoleId>,
}

impl IdMap {
    pub fn user(&self, uid: u64) -> Option<UserId> {
        self.users.to_model.get(&uid).copied()
    }

    pub fn subject(&self, pid: u64) -> Option<SubjectId> {
        self.subjects.to_model.get(&pid).copied()
    }

    pub fn entity(&self, inode: u64) -> Option<EntityId> {
        self.entities.to_model.get(&inode).copied()
    }

    pub fn role(&self, id: u64) -> Option<RoleId> {
        self.roles.to_model.get(&id).copied()
    }

    pub fn uid(&self, u: UserId) -> Option<u64> {
        self.users.to_kernel.get(&u).copied()
    }

    pub fn pid(&self, s: SubjectId) -> Option<u64> {
        self.subjects.to_kernel.get(&s).copied()
    }

    pub fn inode(&self, e: EntityId) -> Option<u64> {
        self.entities.to_kernel.get(&e).copied()
    }

    pub fn role_id(&self, r: RoleId) -> Option<u64> {
        self.roles.to_kernel.get(&r).copied()
    }

    /// Registers an inode the kernel created during the trace. Returns the
    /// existing mapping when the inode is already known.
    pub fn add_inode(&mut self, inode: u64) -> EntityId {
        if let Some(e) = self.entity(inode) {
            return e;
        }
        let e = EntityId(inode);
        self.entities.insert(inode, e);
        e
    }

    pub fn len(&self) -> usize {
        self.users.to_model.len()
            + self.subjects.to_model.len()
            + self.entities.to_model.len()
            + self.roles.to_model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_bijective(&self) -> bool {
        self.users.is_bijective()
            && self.subjects.is_bijective()
            && self.entities.is_bijective()
            && self.roles.is_bijective()
    }
}

fn duplicate(kind: &'static str, id: u64) -> TraceError {
    TraceError::DuplicateId { kind, id }
}

/// Builds the model state a snapshot describes. Identifiers the snapshot
/// references without declaring stay dangling in the state, where the typing
/// invariants report them.
pub fn map_snapshot(snap: &KernelSnapshot) -> Result<(PolicyState, IdMap), TraceError> {
    let mut ids = IdMap::default();
    for u in &snap.users {
        if !ids.users.insert(u.uid, UserId(u.uid)) {
            return Err(duplicate("uid", u.uid));
        }
    }
    for p in &snap.processes {
        if !ids.subjects.insert(p.pid, SubjectId(p.pid)) {
            return Err(duplicate("pid", p.pid));
        }
    }
    for f in &snap.files {
        if !ids.entities.insert(f.inode, EntityId(f.inode)) {
            return Err(duplicate("inode", f.inode));
        }
    }
    for r in &snap.roles {
        if !ids.roles.insert(r.id, RoleId(r.id)) {
            return Err(duplicate("role", r.id));
        }
    }

    // Undeclared references map through the identity so they surface as
    // typing violations rather than vanish.
    let uid = |k: u64| ids.user(k).unwrap_or(UserId(k));
    let ent = |k: u64| ids.entity(k).unwrap_or(EntityId(k));
    let role = |k: u64| ids.role(k).unwrap_or(RoleId(k));

    let mut st = PolicyState::empty();
    for u in &snap.users {
        let id = uid(u.uid);
        st.users.insert(id);
        st.user_int.insert(id, IntegrityLevel(u.int));
        st.user_sec.insert(id, u.sec.clone());
        let roles: BTreeSet<RoleId> = u.roles.iter().map(|r| role(*r)).collect();
        st.user_roles.insert(id, roles);
    }
    for p in &snap.processes {
        let s = SubjectId(p.pid);
        st.subjects.insert(s);
        st.subject_owner.insert(s, uid(p.uid));
        st.subject_int.insert(s, IntegrityLevel(p.int));
        st.subject_sec.insert(s, p.sec.clone());
        let accesses: BTreeSet<(EntityId, AccessKind)> =
            p.accesses.iter().map(|a| (ent(a.inode), a.access)).collect();
        st.subject_accesses.insert(s, accesses);
        let mut fds = BTreeMap::new();
        for fd in &p.fds {
            let of = OpenFile {
                entity: ent(fd.inode),
                kinds: fd.access.iter().copied().collect(),
            };
            if fds.insert(fd.fd, of).is_some() {
                return Err(duplicate("fd", fd.fd as u64));
            }
        }
        st.subject_fds.insert(s, fds);
    }
    for f in &snap.files {
        let e = EntityId(f.inode);
        st.entities.insert(e);
        st.entity_is_container.insert(e, f.is_dir);
        if let Some(p) = f.parent {
            st.entity_parent.insert(e, ent(p));
        }
        st.entity_name.insert(e, f.name.clone());
        st.entity_int.insert(e, IntegrityLevel(f.int));
        st.entity_sec.insert(e, f.sec.clone());
    }
    for r in &snap.roles {
        let id = RoleId(r.id);
        st.roles.insert(id);
        st.role_kind.insert(id, r.kind);
        let rights: BTreeSet<(EntityId, AccessKind)> =
            r.rights.iter().map(|a| (ent(a.inode), a.access)).collect();
        st.role_rights.insert(id, rights);
    }

    let violations = check_invariants(&st);
    if !violations.is_empty() {
        return Err(TraceError::InconsistentSnapshot(violations));
    }
    Ok((st, ids))
}

/// Inverse of [`map_snapshot`]: lists are emitted in ascending id order.
/// Model ids missing from `ids` are emitted under their numeric value.
pub fn export_snapshot(st: &PolicyState, ids: &IdMap) -> KernelSnapshot {
    let uid = |u: UserId| ids.uid(u).unwrap_or(u.0);
    let inode = |e: EntityId| ids.inode(e).unwrap_or(e.0);
    let role_id = |r: RoleId| ids.role_id(r).unwrap_or(r.0);
    let accesses = |set: Option<&BTreeSet<(EntityId, AccessKind)>>| -> Vec<SnapshotAccess> {
        let mut v: Vec<SnapshotAccess> = set
            .into_iter()
            .flatten()
            .map(|(e, a)| SnapshotAccess {
                inode: inode(*e),
                access: *a,
            })
            .collect();
        v.sort();
        v
    };

    let users = st
        .users
        .iter()
        .map(|u| SnapshotUser {
            uid: uid(*u),
            roles: st
                .user_roles
                .get(u)
                .into_iter()
                .flatten()
                .map(|r| role_id(*r))
                .collect(),
            int: st.user_int.get(u).map_or(0, |i| i.0),
            sec: st.user_sec.get(u).cloned().unwrap_or_default(),
        })
        .collect();
    let processes = st
        .subjects
        .iter()
        .map(|s| SnapshotProcess {
            pid: ids.pid(*s).unwrap_or(s.0),
            uid: st.subject_owner.get(s).map_or(0, |u| uid(*u)),
            int: st.subject_int.get(s).map_or(0, |i| i.0),
            sec: st.subject_sec.get(s).cloned().unwrap_or_default(),
            fds: st
                .subject_fds
                .get(s)
                .into_iter()
                .flatten()
                .map(|(fd, of)| SnapshotFd {
                    fd: *fd,
                    inode: inode(of.entity),
                    access: of.kinds.iter().copied().collect(),
                })
                .collect(),
            accesses: accesses(st.subject_accesses.get(s)),
        })
        .collect();
    let files = st
        .entities
        .iter()
        .map(|e| SnapshotFile {
            inode: inode(*e),
            parent: st.entity_parent.get(e).map(|p| inode(*p)),
            name: st.entity_name.get(e).cloned().unwrap_or_default(),
            is_dir: st.is_container(*e),
            int: st.entity_int.get(e).map_or(0, |i| i.0),
            sec: st.entity_sec.get(e).cloned().unwrap_or_default(),
        })
        .collect();
    let roles = st
        .roles
        .iter()
        .map(|r| SnapshotRole {
            id: role_id(*r),
            kind: st.role_kind[r],
            rights: accesses(st.role_rights.get(r)),
        })
        .collect();
    KernelSnapshot {
        users,
        processes,
        files,
        roles,
    }
}
