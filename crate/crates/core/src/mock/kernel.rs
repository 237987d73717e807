use std::collections::{BTreeMap, BTreeSet};

use crate::graphs::errno::*;
use crate::policy::{AccessKind, RoleKind, SecurityLabel};
use crate::trace::{
    KernelSnapshot, SnapshotAccess, SnapshotFd, SnapshotFile, SnapshotProcess, SnapshotRole,
    SnapshotUser,
};

/// Confidentiality label as the simulator stores it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Label {
    pub level: u32,
    pub cats: BTreeSet<u32>,
}

impl Label {
    pub fn new(level: u32, cats: impl IntoIterator<Item = u32>) -> Self {
        Label {
            level,
            cats: cats.into_iter().collect(),
        }
    }

    pub fn below(&self, other: &Label) -> bool {
        self.level <= other.level && self.cats.iter().all(|c| other.cats.contains(c))
    }

    pub fn export(&self) -> SecurityLabel {
        SecurityLabel::new(self.level, self.cats.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inode {
    pub ino: u64,
    pub parent: Option<u64>,
    pub name: String,
    pub dir: bool,
    pub int: u32,
    pub sec: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenFd {
    pub ino: u64,
    pub read: bool,
    pub write: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    pub pid: u64,
    pub uid: u64,
    pub int: u32,
    pub sec: Label,
    pub fds: BTreeMap<u32, OpenFd>,
    /// (inode, is_write) pairs accounted to the process.
    pub held: BTreeSet<(u64, bool)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct User {
    pub uid: u64,
    pub roles: BTreeSet<u64>,
    pub int: u32,
    pub sec: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Role {
    pub id: u64,
    pub kind: RoleKind,
    /// (inode, is_write) pairs.
    pub rights: BTreeSet<(u64, bool)>,
}

/// A call with decoded arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Call {
    Open { path: String, read: bool, write: bool, creat: bool, trunc: bool },
    Close { fd: u32 },
    Read { fd: u32, count: u64 },
    Write { fd: u32, count: u64 },
    Unlink { path: String },
    Mkdir { path: String },
    SetLabel { path: String, int: u32, sec: Label },
}

impl Call {
    pub fn name(&self) -> &'static str {
        match self {
            Call::Open { .. } => "open",
            Call::Close { .. } => "close",
            Call::Read { .. } => "read",
            Call::Write { .. } => "write",
            Call::Unlink { .. } => "unlink",
            Call::Mkdir { .. } => "mkdir",
            Call::SetLabel { .. } => "setlabel",
        }
    }
}

/// Why a call fails. `hook` marks denials by the security check, as opposed
/// to lookup and existence failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Denial {
    pub errno: i32,
    pub hook: bool,
}

fn fail(errno: i32) -> Denial {
    Denial { errno, hook: false }
}

fn refuse(errno: i32) -> Denial {
    Denial { errno, hook: true }
}

/// What a successful call reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Done {
    pub code: i64,
    pub fd: Option<u32>,
    /// Inode, parent and name of an entry the call created.
    pub created: Option<(u64, u64, String)>,
}

impl Done {
    fn code(code: i64) -> Self {
        Done {
            code,
            fd: None,
            created: None,
        }
    }
}

enum Lookup {
    NoParent,
    ParentIsFile,
    Found { dir: u64, target: Option<u64> },
    IsRoot(u64),
}

/// Simulated kernel with a security module combining role-based, integrity
/// and multilevel checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimKernel {
    pub inodes: BTreeMap<u64, Inode>,
    pub procs: BTreeMap<u64, Process>,
    pub users: BTreeMap<u64, User>,
    pub roles: BTreeMap<u64, Role>,
    next_ino: u64,
}

impl SimKernel {
    pub fn new(
        inodes: impl IntoIterator<Item = Inode>,
        procs: impl IntoIterator<Item = Process>,
        users: impl IntoIterator<Item = User>,
        roles: impl IntoIterator<Item = Role>,
    ) -> Self {
        let inodes: BTreeMap<u64, Inode> = inodes.into_iter().map(|i| (i.ino, i)).collect();
        let next_ino = inodes.keys().next_back().map_or(1, |i| i + 1);
        SimKernel {
            inodes,
            procs: procs.into_iter().map(|p| (p.pid, p)).collect(),
            users: users.into_iter().map(|u| (u.uid, u)).collect(),
            roles: roles.into_iter().map(|r| (r.id, r)).collect(),
            next_ino,
        }
    }

    fn root(&self) -> Option<u64> {
        self.inodes.values().find(|i| i.parent.is_none()).map(|i| i.ino)
    }

    fn child(&self, dir: u64, name: &str) -> Option<u64> {
        self.inodes
            .values()
            .find(|i| i.parent == Some(dir) && i.name == name)
            .map(|i| i.ino)
    }

    fn lookup(&self, path: &str) -> Lookup {
        let Some(root) = self.root() else {
            return Lookup::NoParent;
        };
        let parts: Vec<&str> = path.split('/').filter(|p| !p.is_empty()).collect();
        let Some((leaf, dirs)) = parts.split_last() else {
            return Lookup::IsRoot(root);
        };
        let mut dir = root;
        for d in dirs {
            match self.child(dir, d) {
                None => return Lookup::NoParent,
                Some(i) if !self.inodes[&i].dir => return Lookup::ParentIsFile,
                Some(i) => dir = i,
            }
        }
        Lookup::Found {
            dir,
            target: self.child(dir, leaf),
        }
    }

    /// Lookup errors first, then (parent, target). The root has no parent.
    fn resolve(&self, path: &str) -> Result<(Option<u64>, Option<u64>), Denial> {
        match self.lookup(path) {
            Lookup::NoParent => Err(fail(ENOENT)),
            Lookup::ParentIsFile => Err(fail(ENOTDIR)),
            Lookup::Found { dir, target } => Ok((Some(dir), target)),
            Lookup::IsRoot(r) => Ok((None, Some(r))),
        }
    }

    fn proc(&self, pid: u64) -> &Process {
        &self.procs[&pid]
    }

    fn user_roles(&self, pid: u64) -> impl Iterator<Item = &Role> + '_ {
        let uid = self.proc(pid).uid;
        self.users
            .get(&uid)
            .into_iter()
            .flat_map(|u| u.roles.iter())
            .filter_map(|r| self.roles.get(r))
    }

    /// Lowest-numbered non-negative role of the caller's user holding the right.
    fn permitting_role(&self, pid: u64, ino: u64, write: bool) -> Option<u64> {
        self.user_roles(pid)
            .find(|r| r.kind != RoleKind::Negative && r.rights.contains(&(ino, write)))
            .map(|r| r.id)
    }

    fn denied_by_role(&self, pid: u64, ino: u64, write: bool) -> bool {
        self.user_roles(pid)
            .any(|r| r.kind == RoleKind::Negative && r.rights.contains(&(ino, write)))
    }

    fn may_read(&self, pid: u64, ino: u64) -> bool {
        let (p, f) = (self.proc(pid), &self.inodes[&ino]);
        self.permitting_role(pid, ino, false).is_some()
            && !self.denied_by_role(pid, ino, false)
            && f.sec.below(&p.sec)
    }

    fn may_write(&self, pid: u64, ino: u64) -> bool {
        let (p, f) = (self.proc(pid), &self.inodes[&ino]);
        self.permitting_role(pid, ino, true).is_some()
            && !self.denied_by_role(pid, ino, true)
            && f.int <= p.int
            && p.sec.below(&f.sec)
    }

    fn in_use(&self, ino: u64) -> bool {
        self.procs
            .values()
            .any(|p| p.held.iter().any(|(i, _)| *i == ino) || p.fds.values().any(|f| f.ino == ino))
    }

    /// Outcome of `call` without running it. With `hooks` false the security
    /// check is skipped.
    pub fn check(&self, pid: u64, call: &Call, hooks: bool) -> Result<(), Denial> {
        let hook = |ok: bool, errno: i32| {
            if !hooks || ok {
                Ok(())
            } else {
                Err(refuse(errno))
            }
        };
        let p = self.proc(pid);
        match call {
            Call::Open { path, read, write, creat, .. } => {
                let (dir, target) = self.resolve(path)?;
                match target {
                    None if !creat => return Err(fail(ENOENT)),
                    Some(t) if *write && self.inodes[&t].dir => return Err(fail(EISDIR)),
                    None => hook(dir.is_some_and(|d| self.may_write(pid, d)), EACCES)?,
                    Some(t) => {
                        hook(!read || self.may_read(pid, t), EACCES)?;
                        hook(!write || self.may_write(pid, t), EACCES)?;
                    }
                }
                Ok(())
            }
            Call::Close { fd } => match p.fds.get(fd) {
                Some(_) => Ok(()),
                None => Err(fail(EBADF)),
            },
            Call::Read { fd, .. } => match p.fds.get(fd) {
                Some(f) if f.read => Ok(()),
                _ => Err(fail(EBADF)),
            },
            Call::Write { fd, .. } => match p.fds.get(fd) {
                Some(f) if f.write => Ok(()),
                _ => Err(fail(EBADF)),
            },
            Call::Unlink { path } => {
                let (dir, target) = self.resolve(path)?;
                let t = target.ok_or(fail(ENOENT))?;
                if self.inodes[&t].dir {
                    return Err(fail(EISDIR));
                }
                if self.in_use(t) {
                    return Err(fail(EBUSY));
                }
                let d = dir.expect("a file is never the root");
                hook(self.may_write(pid, d) && self.inodes[&t].int <= p.int, EACCES)
            }
            Call::Mkdir { path } => {
                let (dir, target) = self.resolve(path)?;
                if target.is_some() {
                    return Err(fail(EEXIST));
                }
                hook(dir.is_some_and(|d| self.may_write(pid, d)), EACCES)
            }
            Call::SetLabel { path, int, sec } => {
                let (_, target) = self.resolve(path)?;
                let t = target.ok_or(fail(ENOENT))?;
                let f = &self.inodes[&t];
                let admin = self.user_roles(pid).any(|r| r.kind == RoleKind::Administrative);
                hook(
                    admin && f.int <= p.int && f.sec.below(&p.sec) && *int <= p.int && sec.below(&p.sec),
                    EPERM,
                )?;
                // Relabelling may not invalidate an access someone holds.
                let fits = self.procs.values().all(|q| {
                    (!q.held.contains(&(t, true)) || (*int <= q.int && q.sec.below(sec)))
                        && (!q.held.contains(&(t, false)) || sec.below(&q.sec))
                });
                hook(fits, EBUSY)
            }
        }
    }

    /// Performs `call` assuming lookups succeed; security checks are not
    /// consulted. Returns `None` when the call cannot proceed regardless.
    pub fn perform(&mut self, pid: u64, call: &Call) -> Option<Done> {
        let (p_int, p_sec) = {
            let p = self.proc(pid);
            (p.int, p.sec.clone())
        };
        match call {
            Call::Open { path, read, write, .. } => {
                let (dir, target) = self.resolve(path).ok()?;
                let mut created = None;
                let ino = match target {
                    Some(t) => t,
                    None => {
                        let d = dir?;
                        let ino = self.create(pid, d, path, false, p_int, p_sec);
                        created = Some((ino, d, leaf(path).to_owned()));
                        ino
                    }
                };
                let p = self.procs.get_mut(&pid)?;
                if *read {
                    p.held.insert((ino, false));
                }
                if *write {
                    p.held.insert((ino, true));
                }
                let fd = (1..).find(|n| !p.fds.contains_key(n))?;
                p.fds.insert(fd, OpenFd { ino, read: *read, write: *write });
                Some(Done {
                    code: fd as i64,
                    fd: Some(fd),
                    created,
                })
            }
            Call::Close { fd } => {
                let p = self.procs.get_mut(&pid)?;
                let f = p.fds.remove(fd)?;
                let still = |w: bool| {
                    p.fds
                        .values()
                        .any(|o| o.ino == f.ino && if w { o.write } else { o.read })
                };
                let (keep_r, keep_w) = (still(false), still(true));
                if f.read && !keep_r {
                    p.held.remove(&(f.ino, false));
                }
                if f.write && !keep_w {
                    p.held.remove(&(f.ino, true));
                }
                Some(Done::code(0))
            }
            Call::Read { fd, count } | Call::Write { fd, count } => {
                self.proc(pid).fds.get(fd)?;
                Some(Done::code(*count as i64))
            }
            Call::Unlink { path } => {
                let (dir, target) = self.resolve(path).ok()?;
                let (d, t) = (dir?, target?);
                self.procs.get_mut(&pid)?.held.insert((d, true));
                self.inodes.remove(&t);
                for r in self.roles.values_mut() {
                    r.rights.retain(|(i, _)| *i != t);
                }
                Some(Done::code(0))
            }
            Call::Mkdir { path } => {
                let (dir, target) = self.resolve(path).ok()?;
                if target.is_some() {
                    return None;
                }
                let d = dir?;
                let ino = self.create(pid, d, path, true, p_int, p_sec);
                Some(Done {
                    code: 0,
                    fd: None,
                    created: Some((ino, d, leaf(path).to_owned())),
                })
            }
            Call::SetLabel { path, int, sec } => {
                let (_, target) = self.resolve(path).ok()?;
                let f = self.inodes.get_mut(&target?)?;
                f.int = *int;
                f.sec = sec.clone();
                Some(Done::code(0))
            }
        }
    }

    /// New entry under `dir` labelled like the caller. The caller is
    /// accounted write access to `dir`, and the role that allowed writing
    /// `dir` gets read and write rights on the entry.
    fn create(&mut self, pid: u64, dir: u64, path: &str, is_dir: bool, int: u32, sec: Label) -> u64 {
        let ino = self.next_ino;
        self.next_ino += 1;
        let granting = self.permitting_role(pid, dir, true);
        self.procs
            .get_mut(&pid)
            .expect("caller exists")
            .held
            .insert((dir, true));
        self.inodes.insert(
            ino,
            Inode {
                ino,
                parent: Some(dir),
                name: leaf(path).to_owned(),
                dir: is_dir,
                int,
                sec,
            },
        );
        if let Some(r) = granting.and_then(|r| self.roles.get_mut(&r)) {
            r.rights.insert((ino, false));
            r.rights.insert((ino, true));
        }
        ino
    }

    pub fn snapshot(&self) -> KernelSnapshot {
        let access = |(ino, w): &(u64, bool)| SnapshotAccess {
            inode: *ino,
            access: if *w { AccessKind::WriteA } else { AccessKind::ReadA },
        };
        let sorted = |set: &BTreeSet<(u64, bool)>| {
            let mut v: Vec<SnapshotAccess> = set.iter().map(access).collect();
            v.sort();
            v
        };
        KernelSnapshot {
            users: self
                .users
                .values()
                .map(|u| SnapshotUser {
                    uid: u.uid,
                    roles: u.roles.iter().copied().collect(),
                    int: u.int,
                    sec: u.sec.export(),
                })
                .collect(),
            processes: self
                .procs
                .values()
                .map(|p| SnapshotProcess {
                    pid: p.pid,
                    uid: p.uid,
                    int: p.int,
                    sec: p.sec.export(),
                    fds: p
                        .fds
                        .iter()
                        .map(|(fd, o)| SnapshotFd {
                            fd: *fd,
                            inode: o.ino,
                            access: [(o.read, AccessKind::ReadA), (o.write, AccessKind::WriteA)]
                                .into_iter()
                                .filter(|(on, _)| *on)
                                .map(|(_, a)| a)
                                .collect(),
                        })
                        .collect(),
                    accesses: sorted(&p.held),
                })
                .collect(),
            files: self
                .inodes
                .values()
                .map(|i| SnapshotFile {
                    inode: i.ino,
                    parent: i.parent,
                    name: i.name.clone(),
                    is_dir: i.dir,
                    int: i.int,
                    sec: i.sec.export(),
                })
                .collect(),
            roles: self
                .roles
                .values()
                .map(|r| SnapshotRole {
                    id: r.id,
                    kind: r.kind,
                    rights: sorted(&r.rights),
                })
                .collect(),
        }
    }
}

fn leaf(path: &str) -> &str {
    path.rsplit('/').find(|p| !p.is_empty()).unwrap_or("")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel() -> SimKernel {
        let bot = Label::default();
        SimKernel::new(
            [
                Inode { ino: 2, parent: None, name: String::new(), dir: true, int: 0, sec: bot.clone() },
                Inode { ino: 3, parent: Some(2), name: "d".into(), dir: true, int: 0, sec: bot.clone() },
                Inode { ino: 4, parent: Some(2), name: "f".into(), dir: false, int: 1, sec: bot.clone() },
            ],
            [Process { pid: 10, uid: 1, int: 0, sec: bot.clone(), fds: BTreeMap::new(), held: BTreeSet::new() }],
            [User { uid: 1, roles: [5].into(), int: 1, sec: bot }],
            [Role { id: 5, kind: RoleKind::Ordinary, rights: [(2, true), (3, true), (3, false), (4, true)].into() }],
        )
    }

    fn open(path: &str, read: bool, write: bool, creat: bool) -> Call {
        Call::Open { path: path.into(), read, write, creat, trunc: false }
    }

    #[test]
    fn lookup_failures_come_before_the_hook() {
        let k = kernel();
        assert_eq!(k.check(10, &open("/x/y", true, false, false), true), Err(fail(ENOENT)));
        assert_eq!(k.check(10, &open("/f/y", true, false, true), true), Err(fail(ENOTDIR)));
        assert_eq!(k.check(10, &open("/d", false, true, false), true), Err(fail(EISDIR)));
        // Integrity of /f is above the process.
        assert_eq!(k.check(10, &open("/f", false, true, false), true), Err(refuse(EACCES)));
        assert_eq!(k.check(10, &open("/f", false, true, false), false), Ok(()));
    }

    #[test]
    fn create_then_close_then_unlink() {
        let mut k = kernel();
        let c = open("/d/g", true, true, true);
        assert_eq!(k.check(10, &c, true), Ok(()));
        let done = k.perform(10, &c).unwrap();
        assert_eq!(done.fd, Some(1));
        assert_eq!(done.created, Some((5, 3, "g".into())));
        assert!(k.roles[&5].rights.contains(&(5, false)));
        let un = Call::Unlink { path: "/d/g".into() };
        assert_eq!(k.check(10, &un, true), Err(fail(EBUSY)));
        k.perform(10, &Call::Close { fd: 1 }).unwrap();
        assert_eq!(k.check(10, &un, true), Ok(()));
        k.perform(10, &un).unwrap();
        assert!(!k.inodes.contains_key(&5));
        assert!(!k.roles[&5].rights.iter().any(|(i, _)| *i == 5));
    }
}
