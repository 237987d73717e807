use std::collections::BTreeMap;

use crate::policy::{
    relabel_int_ok, relabel_sec_ok, AccessKind, Args, EntityId, IntegrityLevel, OpenFile, Param,
    PolicyState, Resolution, RoleKind, SecurityLabel,
};

use super::errno::*;
use super::graph::{EventNode, SyscallGraph};
use super::params::{ArgSpec, ArgType, SyscallParams};
use super::GraphError;

/// Graphs keyed by syscall name.
#[derive(Clone)]
pub struct GraphCatalog {
    graphs: BTreeMap<&'static str, SyscallGraph>,
}

impl GraphCatalog {
    pub fn new(graphs: impl IntoIterator<Item = SyscallGraph>) -> Self {
        GraphCatalog {
            graphs: graphs.into_iter().map(|g| (g.syscall, g)).collect(),
        }
    }

    pub fn get(&self, syscall: &str) -> Result<&SyscallGraph, GraphError> {
        self.graphs
            .get(syscall)
            .ok_or_else(|| GraphError::UnknownSyscall(syscall.to_owned()))
    }

    pub fn contains(&self, syscall: &str) -> bool {
        self.graphs.contains_key(syscall)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.graphs.keys().copied()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &SyscallGraph> {
        self.graphs.values()
    }
}

/// open, close, read, write, unlink, mkdir and setlabel.
pub fn bundled_catalog() -> GraphCatalog {
    GraphCatalog::new([
        open_graph(),
        close_graph(),
        read_graph(),
        write_graph(),
        unlink_graph(),
        mkdir_graph(),
        setlabel_graph(),
    ])
}

fn arg(name: &'static str, ty: ArgType) -> ArgSpec {
    ArgSpec { name, ty }
}

// Path helpers.

fn resolution(st: &PolicyState, p: &SyscallParams) -> Resolution {
    st.resolve(p.path())
}

fn parent_of(st: &PolicyState, p: &SyscallParams) -> Option<EntityId> {
    match resolution(st, p) {
        Resolution::Parent { parent, .. } => Some(parent),
        _ => None,
    }
}

fn target_of(st: &PolicyState, p: &SyscallParams) -> Option<EntityId> {
    match resolution(st, p) {
        Resolution::Parent { target, .. } => target,
        Resolution::Root(r) => Some(r),
        _ => None,
    }
}

fn parent_exists(st: &PolicyState, p: &SyscallParams) -> bool {
    resolution(st, p) != Resolution::MissingParent
}

fn parent_is_container(st: &PolicyState, p: &SyscallParams) -> bool {
    resolution(st, p) != Resolution::ParentNotContainer
}

fn target_exists(st: &PolicyState, p: &SyscallParams) -> bool {
    target_of(st, p).is_some()
}

fn target_absent(st: &PolicyState, p: &SyscallParams) -> bool {
    target_of(st, p).is_none()
}

// Permission checks on the parent directory, shared by every graph that
// adds or removes a directory entry.

fn parent_rbac_write(st: &PolicyState, p: &SyscallParams) -> bool {
    parent_of(st, p).is_some_and(|d| st.rbac_grants(p.caller, d, AccessKind::WriteA))
}

fn parent_not_forbidden(st: &PolicyState, p: &SyscallParams) -> bool {
    parent_of(st, p).is_some_and(|d| !st.forbidden(p.caller, d, AccessKind::WriteA))
}

fn parent_mic_write(st: &PolicyState, p: &SyscallParams) -> bool {
    parent_of(st, p).is_some_and(|d| st.mic_write_ok(p.caller, d))
}

fn parent_mls_write(st: &PolicyState, p: &SyscallParams) -> bool {
    parent_of(st, p).is_some_and(|d| st.mls_write_ok(p.caller, d))
}

fn with_parent_checks(g: SyscallGraph) -> SyscallGraph {
    g.conjunct("parent_rbac_write", EACCES, parent_rbac_write)
        .conjunct("parent_not_forbidden", EACCES, parent_not_forbidden)
        .conjunct("parent_mic_write", EACCES, parent_mic_write)
        .conjunct("parent_mls_write", EACCES, parent_mls_write)
}

const PARENT_CHECKS: [&str; 4] = [
    "parent_rbac_write",
    "parent_not_forbidden",
    "parent_mic_write",
    "parent_mls_write",
];

// Bindings.

fn bind_write_parent(st: &PolicyState, p: &SyscallParams) -> Vec<Args> {
    parent_of(st, p)
        .map(|d| vec![Args(vec![Param::Subject(p.caller), Param::Entity(d)])])
        .unwrap_or_default()
}

fn bind_read_target(st: &PolicyState, p: &SyscallParams) -> Vec<Args> {
    target_of(st, p)
        .map(|e| vec![Args(vec![Param::Subject(p.caller), Param::Entity(e)])])
        .unwrap_or_default()
}

fn fresh_inode(st: &PolicyState, p: &SyscallParams) -> EntityId {
    p.inode.unwrap_or_else(|| {
        EntityId(st.entities.iter().next_back().map_or(1, |e| e.0 + 1))
    })
}

fn caller_labels(st: &PolicyState, p: &SyscallParams) -> (IntegrityLevel, SecurityLabel) {
    (
        st.subject_int.get(&p.caller).copied().unwrap_or_default(),
        st.subject_sec.get(&p.caller).cloned().unwrap_or_default(),
    )
}

fn bind_create(st: &PolicyState, p: &SyscallParams, container: bool) -> Vec<Args> {
    let Some(parent) = parent_of(st, p) else {
        return Vec::new();
    };
    let (int, sec) = caller_labels(st, p);
    let parent = if container {
        Param::OptEntity(Some(parent))
    } else {
        Param::Entity(parent)
    };
    vec![Args(vec![
        Param::Entity(fresh_inode(st, p)),
        parent,
        Param::Name(p.leaf().to_owned()),
        Param::Int(int),
        Param::Sec(sec),
    ])]
}

/// Read and write rights on the new entry go to the role that let the caller
/// write the parent.
fn bind_grant_creator(st: &PolicyState, p: &SyscallParams) -> Vec<Args> {
    let (Some(parent), Some(e)) = (parent_of(st, p), target_of(st, p)) else {
        return Vec::new();
    };
    let Some(r) = st.granting_role(p.caller, parent, AccessKind::WriteA) else {
        return Vec::new();
    };
    [AccessKind::ReadA, AccessKind::WriteA]
        .into_iter()
        .map(|a| Args(vec![Param::Role(r), Param::Entity(e), Param::Access(a)]))
        .collect()
}

fn ok(_: &mut PolicyState, _: &SyscallParams) -> Option<i64> {
    Some(0)
}

fn open_graph() -> SyscallGraph {
    fn creating(st: &PolicyState, p: &SyscallParams) -> bool {
        target_absent(st, p)
    }
    fn existing(st: &PolicyState, p: &SyscallParams) -> bool {
        target_exists(st, p)
    }
    fn truncating(_: &PolicyState, p: &SyscallParams) -> bool {
        let f = p.open_flags();
        f.trunc && f.writes()
    }
    fn to_read(st: &PolicyState, p: &SyscallParams) -> bool {
        p.open_flags().reads() && !truncating(st, p)
    }
    fn to_write(st: &PolicyState, p: &SyscallParams) -> bool {
        !p.open_flags().reads() && !truncating(st, p)
    }
    fn reads(_: &PolicyState, p: &SyscallParams) -> bool {
        p.open_flags().reads()
    }
    fn no_reads(_: &PolicyState, p: &SyscallParams) -> bool {
        !p.open_flags().reads()
    }
    fn writes(_: &PolicyState, p: &SyscallParams) -> bool {
        p.open_flags().writes()
    }
    fn no_writes(_: &PolicyState, p: &SyscallParams) -> bool {
        !p.open_flags().writes()
    }
    fn target_ok(
        st: &PolicyState,
        p: &SyscallParams,
        wanted: bool,
        check: fn(&PolicyState, &SyscallParams, EntityId) -> bool,
    ) -> bool {
        !wanted || target_of(st, p).is_some_and(|e| check(st, p, e))
    }

    with_parent_checks(SyscallGraph::new(
        "open",
        vec![arg("pathname", ArgType::Path), arg("flags", ArgType::Flags)],
    ))
    .conjunct("path_parent_exists", ENOENT, parent_exists)
    .conjunct("path_parent_is_container", ENOTDIR, parent_is_container)
    .conjunct("target_exists_or_creat", ENOENT, |st, p| {
        target_exists(st, p) || p.open_flags().creat
    })
    .conjunct("not_container_write", EISDIR, |st, p| {
        !p.open_flags().writes() || target_of(st, p).is_none_or(|e| !st.is_container(e))
    })
    .conjunct("mode_read_rbac", EACCES, |st, p| {
        target_ok(st, p, p.open_flags().reads(), |st, p, e| {
            st.rbac_grants(p.caller, e, AccessKind::ReadA)
        })
    })
    .conjunct("mode_read_not_forbidden", EACCES, |st, p| {
        target_ok(st, p, p.open_flags().reads(), |st, p, e| {
            !st.forbidden(p.caller, e, AccessKind::ReadA)
        })
    })
    .conjunct("mode_read_mls", EACCES, |st, p| {
        target_ok(st, p, p.open_flags().reads(), |st, p, e| st.mls_read_ok(p.caller, e))
    })
    .conjunct("mode_write_rbac", EACCES, |st, p| {
        target_ok(st, p, p.open_flags().writes(), |st, p, e| {
            st.rbac_grants(p.caller, e, AccessKind::WriteA)
        })
    })
    .conjunct("mode_write_not_forbidden", EACCES, |st, p| {
        target_ok(st, p, p.open_flags().writes(), |st, p, e| {
            !st.forbidden(p.caller, e, AccessKind::WriteA)
        })
    })
    .conjunct("mode_write_mic", EACCES, |st, p| {
        target_ok(st, p, p.open_flags().writes(), |st, p, e| st.mic_write_ok(p.caller, e))
    })
    .conjunct("mode_write_mls", EACCES, |st, p| {
        target_ok(st, p, p.open_flags().writes(), |st, p, e| st.mls_write_ok(p.caller, e))
    })
    .node(
        EventNode::initial("open_start")
            .guard(&[
                "path_parent_exists",
                "path_parent_is_container",
                "target_exists_or_creat",
                "not_container_write",
            ])
            .arc("exists", existing, "open_check")
            .arc("absent", creating, "open_check_p"),
    )
    .node(
        EventNode::inner("open_check_p")
            .guard(&PARENT_CHECKS)
            .then("open_write_p"),
    )
    .node(
        EventNode::inner("open_write_p")
            .refines("access_write_entity", bind_write_parent)
            .then("open_create"),
    )
    .node(
        EventNode::inner("open_create")
            .refines("create_object", |st, p| bind_create(st, p, false))
            .then("open_grant"),
    )
    .node(
        EventNode::inner("open_grant")
            .refines("grant_rights", bind_grant_creator)
            .then("open_check"),
    )
    .node(
        EventNode::inner("open_check")
            .guard(&[
                "mode_read_rbac",
                "mode_read_not_forbidden",
                "mode_read_mls",
                "mode_write_rbac",
                "mode_write_not_forbidden",
                "mode_write_mic",
                "mode_write_mls",
            ])
            .arc("truncate", truncating, "open_trunc")
            .arc("read", to_read, "open_read")
            .arc("write only", to_write, "open_write"),
    )
    .node(
        EventNode::inner("open_trunc")
            .local("truncate contents", |_, _| None)
            .arc("read", reads, "open_read")
            .arc("write only", no_reads, "open_write"),
    )
    .node(
        EventNode::inner("open_read")
            .refines("access_read_entity", bind_read_target)
            .arc("also write", writes, "open_write")
            .arc("read only", no_writes, "open_finish"),
    )
    .node(
        EventNode::inner("open_write")
            .refines("access_write_entity", bind_read_target)
            .then("open_finish"),
    )
    .node(EventNode::last("open_finish").local("allocate descriptor", |st, p| {
        let e = target_of(st, p)?;
        let f = p.open_flags();
        let mut kinds = std::collections::BTreeSet::new();
        if f.reads() {
            kinds.insert(AccessKind::ReadA);
        }
        if f.writes() {
            kinds.insert(AccessKind::WriteA);
        }
        let fd = st.next_fd(p.caller);
        st.subject_fds
            .entry(p.caller)
            .or_default()
            .insert(fd, OpenFile { entity: e, kinds });
        Some(fd as i64)
    }))
}

fn open_file<'a>(st: &'a PolicyState, p: &SyscallParams) -> Option<&'a OpenFile> {
    st.subject_fds.get(&p.caller)?.get(&p.fd?)
}

fn fd_open(st: &PolicyState, p: &SyscallParams) -> bool {
    open_file(st, p).is_some()
}

fn close_graph() -> SyscallGraph {
    SyscallGraph::new("close", vec![arg("fd", ArgType::Fd)])
        .conjunct("fd_open", EBADF, fd_open)
        .node(
            EventNode::initial("close_start")
                .guard(&["fd_open"])
                .then("close_release"),
        )
        .node(
            EventNode::inner("close_release")
                .refines("release_access", |st, p| {
                    // An access stays held while another descriptor of the
                    // caller still carries it.
                    let Some(of) = open_file(st, p) else {
                        return Vec::new();
                    };
                    let others = st.subject_fds[&p.caller]
                        .iter()
                        .filter(|(fd, o)| Some(**fd) != p.fd && o.entity == of.entity);
                    let mut kinds = of.kinds.clone();
                    for (_, o) in others {
                        for k in &o.kinds {
                            kinds.remove(k);
                        }
                    }
                    kinds
                        .into_iter()
                        .filter(|k| st.holds(p.caller, of.entity, *k))
                        .map(|k| {
                            Args(vec![
                                Param::Subject(p.caller),
                                Param::Entity(of.entity),
                                Param::Access(k),
                            ])
                        })
                        .collect()
                })
                .then("close_finish"),
        )
        .node(
            EventNode::last("close_finish").local("free descriptor", |st, p| {
                if let (Some(fds), Some(fd)) = (st.subject_fds.get_mut(&p.caller), p.fd) {
                    fds.remove(&fd);
                }
                Some(0)
            }),
        )
}

fn transfer(_: &mut PolicyState, p: &SyscallParams) -> Option<i64> {
    Some(p.count.unwrap_or(0) as i64)
}

fn read_graph() -> SyscallGraph {
    SyscallGraph::new("read", vec![arg("fd", ArgType::Fd), arg("count", ArgType::Count)])
        .conjunct("fd_open", EBADF, fd_open)
        .conjunct("fd_readable", EBADF, |st, p| {
            open_file(st, p).is_some_and(|o| o.kinds.contains(&AccessKind::ReadA))
        })
        .node(
            EventNode::initial("read_start")
                .guard(&["fd_open", "fd_readable"])
                .then("read_finish"),
        )
        .node(EventNode::last("read_finish").local("transfer", transfer))
}

fn write_graph() -> SyscallGraph {
    SyscallGraph::new("write", vec![arg("fd", ArgType::Fd), arg("count", ArgType::Count)])
        .conjunct("fd_open", EBADF, fd_open)
        .conjunct("fd_writable", EBADF, |st, p| {
            open_file(st, p).is_some_and(|o| o.kinds.contains(&AccessKind::WriteA))
        })
        .node(
            EventNode::initial("write_start")
                .guard(&["fd_open", "fd_writable"])
                .then("write_finish"),
        )
        .node(EventNode::last("write_finish").local("transfer", transfer))
}

fn unlink_graph() -> SyscallGraph {
    with_parent_checks(SyscallGraph::new("unlink", vec![arg("pathname", ArgType::Path)]))
        .conjunct("path_parent_exists", ENOENT, parent_exists)
        .conjunct("path_parent_is_container", ENOTDIR, parent_is_container)
        .conjunct("target_exists", ENOENT, target_exists)
        .conjunct("target_not_container", EISDIR, |st, p| {
            target_of(st, p).is_some_and(|e| !st.is_container(e))
        })
        .conjunct("target_unused", EBUSY, |st, p| {
            target_of(st, p).is_some_and(|e| !st.any_access_on(e) && !st.any_fd_on(e))
        })
        .conjunct("target_mic_write", EACCES, |st, p| {
            target_of(st, p).is_some_and(|e| st.mic_write_ok(p.caller, e))
        })
        .node(
            EventNode::initial("unlink_start")
                .guard(&[
                    "path_parent_exists",
                    "path_parent_is_container",
                    "target_exists",
                    "target_not_container",
                    "target_unused",
                ])
                .then("unlink_check_p"),
        )
        .node(
            EventNode::inner("unlink_check_p")
                .guard(&PARENT_CHECKS)
                .guard(&["target_mic_write"])
                .then("unlink_write_p"),
        )
        .node(
            EventNode::inner("unlink_write_p")
                .refines("access_write_entity", bind_write_parent)
                .then("unlink_delete"),
        )
        .node(
            EventNode::inner("unlink_delete")
                .refines("delete_entity", |st, p| {
                    target_of(st, p)
                        .map(|e| vec![Args(vec![Param::Entity(e)])])
                        .unwrap_or_default()
                })
                .then("unlink_finish"),
        )
        .node(EventNode::last("unlink_finish").local("report", ok))
}

fn mkdir_graph() -> SyscallGraph {
    with_parent_checks(SyscallGraph::new("mkdir", vec![arg("pathname", ArgType::Path)]))
        .conjunct("path_parent_exists", ENOENT, parent_exists)
        .conjunct("path_parent_is_container", ENOTDIR, parent_is_container)
        .conjunct("target_absent", EEXIST, target_absent)
        .node(
            EventNode::initial("mkdir_start")
                .guard(&["path_parent_exists", "path_parent_is_container", "target_absent"])
                .then("mkdir_check_p"),
        )
        .node(
            EventNode::inner("mkdir_check_p")
                .guard(&PARENT_CHECKS)
                .then("mkdir_write_p"),
        )
        .node(
            EventNode::inner("mkdir_write_p")
                .refines("access_write_entity", bind_write_parent)
                .then("mkdir_create"),
        )
        .node(
            EventNode::inner("mkdir_create")
                .refines("create_container", |st, p| bind_create(st, p, true))
                .then("mkdir_grant"),
        )
        .node(
            EventNode::inner("mkdir_grant")
                .refines("grant_rights", bind_grant_creator)
                .then("mkdir_finish"),
        )
        .node(EventNode::last("mkdir_finish").local("report", ok))
}

fn setlabel_graph() -> SyscallGraph {
    fn caller_sec(st: &PolicyState, p: &SyscallParams) -> SecurityLabel {
        caller_labels(st, p).1
    }
    fn caller_int(st: &PolicyState, p: &SyscallParams) -> IntegrityLevel {
        caller_labels(st, p).0
    }
    SyscallGraph::new(
        "setlabel",
        vec![
            arg("pathname", ArgType::Path),
            arg("int", ArgType::Int),
            arg("sec", ArgType::Sec),
        ],
    )
    .conjunct("path_parent_exists", ENOENT, parent_exists)
    .conjunct("path_parent_is_container", ENOTDIR, parent_is_container)
    .conjunct("target_exists", ENOENT, target_exists)
    .conjunct("admin_role", EPERM, |st, p| {
        st.has_role_kind(p.caller, RoleKind::Administrative)
    })
    .conjunct("old_int_within_caller", EPERM, |st, p| {
        target_of(st, p).is_some_and(|e| st.entity_int.get(&e).is_some_and(|i| *i <= caller_int(st, p)))
    })
    .conjunct("old_sec_within_caller", EPERM, |st, p| {
        target_of(st, p)
            .is_some_and(|e| st.entity_sec.get(&e).is_some_and(|l| l.leq(&caller_sec(st, p))))
    })
    .conjunct("new_int_within_caller", EPERM, |st, p| {
        p.new_int.is_some_and(|i| i <= caller_int(st, p))
    })
    .conjunct("new_sec_within_caller", EPERM, |st, p| {
        p.new_sec.as_ref().is_some_and(|l| l.leq(&caller_sec(st, p)))
    })
    .conjunct("int_compatible", EBUSY, |st, p| {
        match (target_of(st, p), p.new_int) {
            (Some(e), Some(i)) => relabel_int_ok(st, e, i),
            _ => false,
        }
    })
    .conjunct("sec_compatible", EBUSY, |st, p| {
        match (target_of(st, p), p.new_sec.as_ref()) {
            (Some(e), Some(l)) => relabel_sec_ok(st, e, l),
            _ => false,
        }
    })
    .node(
        EventNode::initial("setlabel_start")
            .guard(&["path_parent_exists", "path_parent_is_container", "target_exists"])
            .then("setlabel_check"),
    )
    .node(
        EventNode::inner("setlabel_check")
            .guard(&[
                "admin_role",
                "old_int_within_caller",
                "old_sec_within_caller",
                "new_int_within_caller",
                "new_sec_within_caller",
                "int_compatible",
                "sec_compatible",
            ])
            .then("setlabel_int"),
    )
    .node(
        EventNode::inner("setlabel_int")
            .refines("set_entity_int", |st, p| match (target_of(st, p), p.new_int) {
                (Some(e), Some(i)) => vec![Args(vec![Param::Entity(e), Param::Int(i)])],
                _ => Vec::new(),
            })
            .then("setlabel_sec"),
    )
    .node(
        EventNode::inner("setlabel_sec")
            .refines("set_entity_sec", |st, p| {
                match (target_of(st, p), p.new_sec.clone()) {
                    (Some(e), Some(l)) => vec![Args(vec![Param::Entity(e), Param::Sec(l)])],
                    _ => Vec::new(),
                }
            })
            .then("setlabel_finish"),
    )
    .node(EventNode::last("setlabel_finish").local("report", ok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{replay_syscall, OpenFlags, OpenMode, Verdict};
    use crate::policy::{apply_event, SubjectId, UserId, RoleId};

    fn ev(st: PolicyState, name: &str, args: Vec<Param>) -> PolicyState {
        apply_event(&st, name, &Args(args)).unwrap()
    }

    /// `/` and `/d`, one subject holding every right on both.
    fn world() -> PolicyState {
        let lo = IntegrityLevel(0);
        let bot = SecurityLabel::bottom();
        let mut st = PolicyState::empty();
        st = ev(st, "create_user", vec![Param::User(UserId(1)), Param::Int(lo), Param::Sec(bot.clone())]);
        st = ev(st, "create_subject", vec![
            Param::Subject(SubjectId(1)), Param::User(UserId(1)), Param::Int(lo), Param::Sec(bot.clone()),
        ]);
        st = ev(st, "create_container", vec![
            Param::Entity(EntityId(1)), Param::OptEntity(None), Param::Name(String::new()),
            Param::Int(lo), Param::Sec(bot.clone()),
        ]);
        st = ev(st, "create_container", vec![
            Param::Entity(EntityId(2)), Param::OptEntity(Some(EntityId(1))), Param::Name("d".into()),
            Param::Int(lo), Param::Sec(bot),
        ]);
        st = ev(st, "create_role", vec![Param::Role(RoleId(1)), Param::Kind(RoleKind::Ordinary)]);
        st = ev(st, "assign_role", vec![Param::User(UserId(1)), Param::Role(RoleId(1))]);
        for e in [1, 2] {
            for a in [AccessKind::ReadA, AccessKind::WriteA] {
                st = ev(st, "grant_rights", vec![Param::Role(RoleId(1)), Param::Entity(EntityId(e)), Param::Access(a)]);
            }
        }
        st
    }

    #[test]
    fn open_create_takes_eight_steps() {
        let cat = bundled_catalog();
        let p = SyscallParams::new(SubjectId(1))
            .with_path("/d/f")
            .with_flags(OpenFlags::new(OpenMode::WriteOnly, true, false));
        let out = replay_syscall(&world(), cat.get("open").unwrap(), &p).unwrap();
        assert_eq!(out.verdict, Verdict::Granted);
        assert_eq!(
            out.path,
            [
                "open_start", "open_check_p", "open_write_p", "open_create",
                "open_grant", "open_check", "open_write", "open_finish",
            ]
        );
        assert_eq!(out.return_value, 1);
        let f = EntityId(3);
        assert!(out.state.entities.contains(&f));
        assert!(out.state.holds(SubjectId(1), f, AccessKind::WriteA));
        assert!(out.state.holds(SubjectId(1), EntityId(2), AccessKind::WriteA));
        assert!(crate::policy::check_invariants(&out.state).is_empty());
    }

    #[test]
    fn denial_reports_first_failing_conjunct_and_keeps_state() {
        let cat = bundled_catalog();
        let st = world();
        let p = SyscallParams::new(SubjectId(1))
            .with_path("/d/missing")
            .with_flags(OpenFlags::new(OpenMode::ReadOnly, false, false));
        let out = replay_syscall(&st, cat.get("open").unwrap(), &p).unwrap();
        assert_eq!(
            out.verdict,
            Verdict::Denied {
                site: "open_start",
                conjunct: Some("target_exists_or_creat"),
                errno: ENOENT,
            }
        );
        assert_eq!(out.return_value, -(ENOENT as i64));
        assert_eq!(out.state, st);
    }

    #[test]
    fn write_without_rights_is_eacces() {
        let cat = bundled_catalog();
        let st = ev(world(), "revoke_rights", vec![
            Param::Role(RoleId(1)), Param::Entity(EntityId(2)), Param::Access(AccessKind::WriteA),
        ]);
        let p = SyscallParams::new(SubjectId(1)).with_path("/d/f")
            .with_flags(OpenFlags::new(OpenMode::WriteOnly, true, false));
        let out = replay_syscall(&st, cat.get("open").unwrap(), &p).unwrap();
        assert_eq!(out.errno(), Some(EACCES));
        assert_eq!(out.path, ["open_start", "open_check_p"]);
    }

    #[test]
    fn open_read_close_round_trip() {
        let cat = bundled_catalog();
        let st = world();
        let creat = SyscallParams::new(SubjectId(1)).with_path("/d/f")
            .with_flags(OpenFlags::new(OpenMode::ReadWrite, true, false));
        let st = replay_syscall(&st, cat.get("open").unwrap(), &creat).unwrap().state;
        let rd = SyscallParams::new(SubjectId(1)).with_fd(1).with_count(5);
        let out = replay_syscall(&st, cat.get("read").unwrap(), &rd).unwrap();
        assert_eq!(out.return_value, 5);
        let cl = SyscallParams::new(SubjectId(1)).with_fd(1);
        let closed = replay_syscall(&st, cat.get("close").unwrap(), &cl).unwrap().state;
        assert!(!closed.holds(SubjectId(1), EntityId(3), AccessKind::ReadA));
        assert!(!closed.any_fd_on(EntityId(3)));
        let again = replay_syscall(&closed, cat.get("read").unwrap(), &rd).unwrap();
        assert_eq!(again.errno(), Some(EBADF));
        let un = SyscallParams::new(SubjectId(1)).with_path("/d/f");
        let gone = replay_syscall(&closed, cat.get("unlink").unwrap(), &un).unwrap();
        assert!(gone.granted());
        assert!(!gone.state.entities.contains(&EntityId(3)));
    }

    #[test]
    fn unknown_caller_is_malformed() {
        let cat = bundled_catalog();
        let p = SyscallParams::new(SubjectId(9)).with_fd(1);
        assert!(matches!(
            replay_syscall(&world(), cat.get("close").unwrap(), &p),
            Err(GraphError::MalformedParams { .. })
        ));
        assert!(matches!(cat.get("fork"), Err(GraphError::UnknownSyscall(_))));
    }
}
