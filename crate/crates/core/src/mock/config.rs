use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graphs::errno;

use super::MockError;

/// Syscalls the simulator can execute.
pub const SYSCALLS: [&str; 7] = ["open", "close", "read", "write", "unlink", "mkdir", "setlabel"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Universe {
    pub users: usize,
    /// Files and directories besides the root in the initial tree.
    pub files: usize,
    pub int_levels: u32,
    pub sec_levels: u32,
    pub categories: u32,
}

impl Default for Universe {
    fn default() -> Self {
        Universe {
            users: 2,
            files: 6,
            int_levels: 2,
            sec_levels: 2,
            categories: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FaultKind {
    /// Succeed where the security check denied.
    WrongGrant,
    /// Fail with `errno` where the kernel would have succeeded.
    WrongDeny { errno: i32 },
    /// Fail with `ENOMEM` whatever the checks say.
    ResourceExhaustion,
    /// Skip the security check; existence checks still run.
    MissingHook,
}

/// Matches calls by seq, by syscall name, or both. An empty trigger matches
/// every call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Trigger {
    pub fn at(seq: u64) -> Self {
        Trigger {
            seq: Some(seq),
            name: None,
        }
    }

    pub fn on(name: &str) -> Self {
        Trigger {
            seq: None,
            name: Some(name.to_owned()),
        }
    }

    pub fn matches(&self, seq: u64, name: &str) -> bool {
        self.seq.is_none_or(|s| s == seq) && self.name.as_deref().is_none_or(|n| n == name)
    }
}

/// A fault fires once, at the first matching call where it changes the
/// outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    #[serde(flatten)]
    pub kind: FaultKind,
    #[serde(default)]
    pub trigger: Trigger,
}

fn default_weights() -> BTreeMap<String, f64> {
    [
        ("open", 30.0),
        ("close", 15.0),
        ("read", 10.0),
        ("write", 10.0),
        ("unlink", 10.0),
        ("mkdir", 10.0),
        ("setlabel", 15.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n_calls: usize,
    #[serde(default)]
    pub universe: Universe,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default = "default_weights")]
    pub weights: BTreeMap<String, f64>,
}

impl SimConfig {
    pub fn new(seed: u64, n_calls: usize) -> Self {
        SimConfig {
            seed,
            n_calls,
            universe: Universe::default(),
            faults: Vec::new(),
            weights: default_weights(),
        }
    }

    pub fn validate(&self) -> Result<(), MockError> {
        let bad = |m: String| Err(MockError::InvalidConfig(m));
        let u = &self.universe;
        if !(1..=16).contains(&u.users) {
            return bad(format!("users must be in 1..=16, got {}", u.users));
        }
        if u.files > 64 {
            return bad(format!("files must be at most 64, got {}", u.files));
        }
        if !(1..=16).contains(&u.int_levels) || !(1..=16).contains(&u.sec_levels) {
            return bad("levels must be in 1..=16".into());
        }
        if u.categories > 8 {
            return bad(format!("categories must be at most 8, got {}", u.categories));
        }
        for (name, w) in &self.weights {
            if !SYSCALLS.contains(&name.as_str()) {
                return bad(format!("unknown syscall `{name}` in weights"));
            }
            if !w.is_finite() || *w < 0.0 {
                return bad(format!("weight of `{name}` must be non-negative"));
            }
        }
        if self.weights.values().all(|w| *w == 0.0) {
            return bad("all weights are zero".into());
        }
        for f in &self.faults {
            if let FaultKind::WrongDeny { errno: e } = f.kind {
                if ![errno::EACCES, errno::EPERM, errno::EINVAL, errno::ENOMEM].contains(&e) {
                    return bad(format!("WrongDeny errno {e} is not one of EACCES, EPERM, EINVAL, ENOMEM"));
                }
            }
            if let Some(n) = &f.trigger.name {
                if !SYSCALLS.contains(&n.as_str()) {
                    return bad(format!("trigger names unknown syscall `{n}`"));
                }
            }
            if f.trigger.seq == Some(0) {
                return bad("trigger seq must be positive".into());
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, MockError> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| MockError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MockError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| MockError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
