use std::collections::BTreeMap;

use serde_json::Value;

use crate::policy::{path_components, EntityId, Fd, IntegrityLevel, SecurityLabel, SubjectId};

use super::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpenMode {
    ReadOnly,
    WriteOnly,
    ReadWrite,
}

/// Flags of `open`. Exactly one access mode is always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpenFlags {
    pub mode: OpenMode,
    pub creat: bool,
    pub trunc: bool,
}

impl OpenFlags {
    pub const RDONLY: &'static str = "O_RDONLY";
    pub const WRONLY: &'static str = "O_WRONLY";
    pub const RDWR: &'static str = "O_RDWR";
    pub const CREAT: &'static str = "O_CREAT";
    pub const TRUNC: &'static str = "O_TRUNC";

    pub fn new(mode: OpenMode, creat: bool, trunc: bool) -> Self {
        OpenFlags { mode, creat, trunc }
    }

    pub fn reads(&self) -> bool {
        matches!(self.mode, OpenMode::ReadOnly | OpenMode::ReadWrite)
    }

    pub fn writes(&self) -> bool {
        matches!(self.mode, OpenMode::WriteOnly | OpenMode::ReadWrite)
    }

    pub fn from_symbols<S: AsRef<str>>(symbols: &[S]) -> Result<Self, String> {
        let mut mode = None;
        let mut creat = false;
        let mut trunc = false;
        for s in symbols {
            let m = match s.as_ref() {
                Self::RDONLY => OpenMode::ReadOnly,
                Self::WRONLY => OpenMode::WriteOnly,
                Self::RDWR => OpenMode::ReadWrite,
                Self::CREAT => {
                    creat = true;
                    continue;
                }
                Self::TRUNC => {
                    trunc = true;
                    continue;
                }
                other => return Err(format!("unknown open flag `{other}`")),
            };
            if mode.replace(m).is_some() {
                return Err("more than one access mode".into());
            }
        }
        let mode = mode.ok_or_else(|| "no access mode".to_string())?;
        Ok(OpenFlags { mode, creat, trunc })
    }

    pub fn symbols(&self) -> Vec<&'static str> {
        let mut out = vec![match self.mode {
            OpenMode::ReadOnly => Self::RDONLY,
            OpenMode::WriteOnly => Self::WRONLY,
            OpenMode::ReadWrite => Self::RDWR,
        }];
        if self.creat {
            out.push(Self::CREAT);
        }
        if self.trunc {
            out.push(Self::TRUNC);
        }
        out
    }
}

/// Argument kinds a syscall signature may declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgType {
    Path,
    Flags,
    Fd,
    Count,
    Int,
    Sec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArgSpec {
    pub name: &'static str,
    pub ty: ArgType,
}

/// Decoded arguments of one invocation. Which fields are set is fixed by the
/// syscall's signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyscallParams {
    pub caller: SubjectId,
    pub path: Option<Vec<String>>,
    pub flags: Option<OpenFlags>,
    pub fd: Option<Fd>,
    pub count: Option<u64>,
    pub new_int: Option<IntegrityLevel>,
    pub new_sec: Option<SecurityLabel>,
    /// Inode the kernel assigned to a newly created entity, when known.
    pub inode: Option<EntityId>,
}

impl SyscallParams {
    pub fn new(caller: SubjectId) -> Self {
        SyscallParams {
            caller,
            path: None,
            flags: None,
            fd: None,
            count: None,
            new_int: None,
            new_sec: None,
            inode: None,
        }
    }

    pub fn with_path(mut self, path: &str) -> Self {
        self.path = Some(path_components(path));
        self
    }

    pub fn with_flags(mut self, flags: OpenFlags) -> Self {
        self.flags = Some(flags);
        self
    }

    pub fn with_fd(mut self, fd: Fd) -> Self {
        self.fd = Some(fd);
        self
    }

    pub fn with_count(mut self, count: u64) -> Self {
        self.count = Some(count);
        self
    }

    pub fn with_label(mut self, int: IntegrityLevel, sec: SecurityLabel) -> Self {
        self.new_int = Some(int);
        self.new_sec = Some(sec);
        self
    }

    pub fn with_inode(mut self, inode: EntityId) -> Self {
        self.inode = Some(inode);
        self
    }

    pub fn path(&self) -> &[String] {
        self.path.as_deref().unwrap_or(&[])
    }

    pub fn open_flags(&self) -> OpenFlags {
        self.flags
            .unwrap_or(OpenFlags::new(OpenMode::ReadOnly, false, false))
    }

    /// Last path component.
    pub fn leaf(&self) -> &str {
        self.path().last().map(String::as_str).unwrap_or("")
    }

    /// Every argument the signature declares is present.
    pub fn conforms(&self, signature: &[ArgSpec]) -> Result<(), String> {
        for spec in signature {
            let present = match spec.ty {
                ArgType::Path => self.path.is_some(),
                ArgType::Flags => self.flags.is_some(),
                ArgType::Fd => self.fd.is_some(),
                ArgType::Count => self.count.is_some(),
                ArgType::Int => self.new_int.is_some(),
                ArgType::Sec => self.new_sec.is_some(),
            };
            if !present {
                return Err(format!("missing argument `{}`", spec.name));
            }
        }
        Ok(())
    }

    /// Decodes trace arguments against `signature`. Unknown argument names
    /// are rejected; `aux.inode` is carried through when present.
    pub fn decode(
        syscall: &str,
        signature: &[ArgSpec],
        caller: SubjectId,
        args: &BTreeMap<String, Value>,
        aux: &BTreeMap<String, Value>,
    ) -> Result<Self, GraphError> {
        let bad = |reason: String| GraphError::MalformedParams {
            syscall: syscall.to_owned(),
            reason,
        };
        let mut p = SyscallParams::new(caller);
        for (name, value) in args {
            let spec = signature
                .iter()
                .find(|s| s.name == name)
                .ok_or_else(|| bad(format!("unexpected argument `{name}`")))?;
            match spec.ty {
                ArgType::Path => {
                    let s = value
                        .as_str()
                        .ok_or_else(|| bad(format!("`{name}` must be a string")))?;
                    if !s.starts_with('/') {
                        return Err(bad(format!("`{name}` must be an absolute path")));
                    }
                    p.path = Some(path_components(s));
                }
                ArgType::Flags => {
                    let arr = value
                        .as_array()
                        .ok_or_else(|| bad(format!("`{name}` must be a list")))?;
                    let syms: Vec<&str> = arr
                        .iter()
                        .map(|v| v.as_str().ok_or_else(|| bad("flag must be a string".into())))
                        .collect::<Result<_, _>>()?;
                    p.flags = Some(OpenFlags::from_symbols(&syms).map_err(bad)?);
                }
                ArgType::Fd => {
                    let n = value
                        .as_u64()
                        .and_then(|n| Fd::try_from(n).ok())
                        .ok_or_else(|| bad(format!("`{name}` must be a descriptor")))?;
                    p.fd = Some(n);
                }
                ArgType::Count => {
                    p.count = Some(
                        value
                            .as_u64()
                            .ok_or_else(|| bad(format!("`{name}` must be a count")))?,
                    );
                }
                ArgType::Int => {
                    let n = value
                        .as_u64()
                        .and_then(|n| u32::try_from(n).ok())
                        .ok_or_else(|| bad(format!("`{name}` must be a level")))?;
                    p.new_int = Some(IntegrityLevel(n));
                }
                ArgType::Sec => {
                    let label: SecurityLabel = serde_json::from_value(value.clone())
                        .map_err(|e| bad(format!("`{name}`: {e}")))?;
                    p.new_sec = Some(label);
                }
            }
        }
        if let Some(v) = aux.get("inode") {
            let n = v
                .as_u64()
                .ok_or_else(|| bad("aux inode must be an integer".into()))?;
            p.inode = Some(EntityId(n));
        }
        p.conforms(signature).map_err(bad)?;
        Ok(p)
    }

    /// Inverse of [`decode`](Self::decode) for the argument map.
    pub fn encode_args(&self, signature: &[ArgSpec]) -> BTreeMap<String, Value> {
        let mut out = BTreeMap::new();
        for spec in signature {
            let v = match spec.ty {
                ArgType::Path => self
                    .path
                    .as_ref()
                    .map(|c| Value::from(format!("/{}", c.join("/")))),
                ArgType::Flags => self.flags.map(|f| Value::from(f.symbols())),
                ArgType::Fd => self.fd.map(Value::from),
                ArgType::Count => self.count.map(Value::from),
                ArgType::Int => self.new_int.map(|i| Value::from(i.0)),
                ArgType::Sec => self
                    .new_sec
                    .as_ref()
                    .map(|l| serde_json::to_value(l).expect("label serializes")),
            };
            if let Some(v) = v {
                out.insert(spec.name.to_owned(), v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_parsing() {
        let f = OpenFlags::from_symbols(&["O_WRONLY", "O_CREAT"]).unwrap();
        assert!(f.writes() && !f.reads() && f.creat && !f.trunc);
        assert!(OpenFlags::from_symbols(&["O_RDONLY", "O_RDWR"]).is_err());
        assert!(OpenFlags::from_symbols(&["O_CREAT"]).is_err());
        assert!(OpenFlags::from_symbols(&["O_APPEND", "O_RDONLY"]).is_err());
        assert_eq!(f.symbols(), vec!["O_WRONLY", "O_CREAT"]);
    }
}
