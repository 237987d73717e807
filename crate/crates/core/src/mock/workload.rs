use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::policy::RoleKind;

use super::config::{SimConfig, Universe};
use super::kernel::{Call, Inode, Label, Process, Role, SimKernel, User};

/// Names the workload draws path components from. Initial files use them
/// too so that generated paths often hit existing entries.
pub const NAMES: [&str; 4] = ["a", "b", "c", "d"];

/// Paths at the edges of the namespace: the root, and paths under a
/// directory the workload never creates.
pub const BOUNDARY_PATHS: [&str; 3] = ["/", "/zz/a", "/zz/zz/b"];

pub const ROOT_INODE: u64 = 2;

fn random_label(rng: &mut ChaCha8Rng, u: &Universe) -> Label {
    Label::new(
        rng.random_range(0..u.sec_levels),
        (0..u.categories).filter(|_| rng.random_bool(0.5)),
    )
}

fn top_label(u: &Universe) -> Label {
    Label::new(u.sec_levels - 1, 0..u.categories)
}

fn label_below(rng: &mut ChaCha8Rng, l: &Label) -> Label {
    Label::new(
        rng.random_range(0..=l.level),
        l.cats.iter().copied().filter(|_| rng.random_bool(0.5)).collect::<Vec<_>>(),
    )
}

/// A secure starting kernel: nothing is open yet. Users get one ordinary
/// role each; the first user also holds the administrative role and the
/// last one a negative role.
pub fn initial_kernel(u: &Universe, rng: &mut ChaCha8Rng) -> SimKernel {
    let n = u.users as u64;
    let admin = n + 1;
    let negative = n + 2;

    let mut users = Vec::new();
    for i in 0..n {
        let (int, sec) = if i == 0 {
            (u.int_levels - 1, top_label(u))
        } else {
            (rng.random_range(0..u.int_levels), random_label(rng, u))
        };
        let mut roles = BTreeSet::from([i + 1]);
        if i == 0 {
            roles.insert(admin);
        }
        if i == n - 1 {
            roles.insert(negative);
        }
        users.push(User {
            uid: 1000 + i,
            roles,
            int,
            sec,
        });
    }

    let mut procs = Vec::new();
    let mut pid = 100;
    for user in &users {
        // The first process runs unclassified at the user's full integrity,
        // so it can write low directories such as the root.
        for k in 0..rng.random_range(1..=2) {
            let (int, sec) = if k == 0 {
                (user.int, Label::default())
            } else {
                (rng.random_range(0..=user.int), label_below(rng, &user.sec))
            };
            procs.push(Process {
                pid,
                uid: user.uid,
                int,
                sec,
                fds: BTreeMap::new(),
                held: BTreeSet::new(),
            });
            pid += 1;
        }
    }

    let mut inodes = vec![Inode {
        ino: ROOT_INODE,
        parent: None,
        name: String::new(),
        dir: true,
        int: 0,
        sec: Label::default(),
    }];
    let mut ino = ROOT_INODE + 1;
    for _ in 0..u.files {
        let dirs: Vec<u64> = inodes.iter().filter(|i| i.dir).map(|i| i.ino).collect();
        let parent = *dirs.choose(rng).expect("the root is a directory");
        let taken: BTreeSet<&str> = inodes
            .iter()
            .filter(|i| i.parent == Some(parent))
            .map(|i| i.name.as_str())
            .collect();
        let free: Vec<&str> = NAMES.iter().copied().filter(|n| !taken.contains(n)).collect();
        let Some(name) = free.choose(rng) else {
            continue;
        };
        inodes.push(Inode {
            ino,
            parent: Some(parent),
            name: (*name).to_owned(),
            dir: rng.random_bool(0.4),
            int: rng.random_range(0..u.int_levels),
            sec: random_label(rng, u),
        });
        ino += 1;
    }

    let mut roles = Vec::new();
    for i in 0..n {
        let mut rights = BTreeSet::new();
        for f in &inodes {
            let (pr, pw) = if f.ino == ROOT_INODE { (0.9, 0.7) } else { (0.7, 0.6) };
            if rng.random_bool(pr) {
                rights.insert((f.ino, false));
            }
            if rng.random_bool(pw) {
                rights.insert((f.ino, true));
            }
        }
        roles.push(Role {
            id: i + 1,
            kind: RoleKind::Ordinary,
            rights,
        });
    }
    roles.push(Role {
        id: admin,
        kind: RoleKind::Administrative,
        rights: BTreeSet::new(),
    });
    let mut forbidden = BTreeSet::new();
    for f in inodes.iter().filter(|f| f.ino != ROOT_INODE) {
        for w in [false, true] {
            if rng.random_bool(0.15) {
                forbidden.insert((f.ino, w));
            }
        }
    }
    roles.push(Role {
        id: negative,
        kind: RoleKind::Negative,
        rights: forbidden,
    });

    SimKernel::new(inodes, procs, users, roles)
}

/// Draws calls independently of kernel state, so runs that differ only in
/// injected faults issue the same calls.
pub struct Workload {
    pids: Vec<u64>,
    names: Vec<&'static str>,
    pick: WeightedIndex<f64>,
    universe: Universe,
}

impl Workload {
    pub fn new(cfg: &SimConfig, pids: Vec<u64>) -> Self {
        let (names, weights): (Vec<&'static str>, Vec<f64>) = super::config::SYSCALLS
            .iter()
            .map(|n| (*n, cfg.weights.get(*n).copied().unwrap_or(0.0)))
            .unzip();
        Workload {
            pids,
            names,
            pick: WeightedIndex::new(weights).expect("weights are validated"),
            universe: cfg.universe.clone(),
        }
    }

    fn path(&self, rng: &mut ChaCha8Rng) -> String {
        if rng.random_bool(0.2) {
            return BOUNDARY_PATHS.choose(rng).unwrap().to_string();
        }
        let depth = match rng.random_range(0..100) {
            0..45 => 1,
            45..80 => 2,
            _ => 3,
        };
        (0..depth)
            .map(|_| format!("/{}", NAMES.choose(rng).unwrap()))
            .collect()
    }

    fn level(&self, rng: &mut ChaCha8Rng, levels: u32) -> u32 {
        if rng.random_bool(0.3) {
            if rng.random_bool(0.5) { 0 } else { levels - 1 }
        } else {
            rng.random_range(0..levels)
        }
    }

    fn label(&self, rng: &mut ChaCha8Rng) -> Label {
        let u = &self.universe;
        if rng.random_bool(0.3) {
            if rng.random_bool(0.5) { Label::default() } else { top_label(u) }
        } else {
            random_label(rng, u)
        }
    }

    pub fn next(&self, rng: &mut ChaCha8Rng) -> (u64, Call) {
        let pid = *self.pids.choose(rng).expect("at least one process");
        let call = match self.names[self.pick.sample(rng)] {
            "open" => {
                let (read, write) = match rng.random_range(0..3) {
                    0 => (true, false),
                    1 => (false, true),
                    _ => (true, true),
                };
                Call::Open {
                    path: self.path(rng),
                    read,
                    write,
                    creat: rng.random_bool(0.5),
                    trunc: rng.random_bool(0.15),
                }
            }
            "close" => Call::Close {
                fd: rng.random_range(1..=2),
            },
            "read" => Call::Read {
                fd: rng.random_range(1..=2),
                count: rng.random_range(1..=4096),
            },
            "write" => Call::Write {
                fd: rng.random_range(1..=2),
                count: rng.random_range(1..=4096),
            },
            "unlink" => Call::Unlink {
                path: self.path(rng),
            },
            "mkdir" => Call::Mkdir {
                path: self.path(rng),
            },
            _ => Call::SetLabel {
                path: self.path(rng),
                int: self.level(rng, self.universe.int_levels),
                sec: self.label(rng),
            },
        };
        (pid, call)
    }
}
