//! Linux errno values used by the modeled syscalls.

pub const EPERM: i32 = 1;
pub const ENOENT: i32 = 2;
pub const EBADF: i32 = 9;
pub const ENOMEM: i32 = 12;
pub const EACCES: i32 = 13;
pub const EBUSY: i32 = 16;
pub const EEXIST: i32 = 17;
pub const ENOTDIR: i32 = 20;
pub const EISDIR: i32 = 21;
pub const EINVAL: i32 = 22;

const NAMES: &[(i32, &str)] = &[
    (EPERM, "EPERM"),
    (ENOENT, "ENOENT"),
    (EBADF, "EBADF"),
    (ENOMEM, "ENOMEM"),
    (EACCES, "EACCES"),
    (EBUSY, "EBUSY"),
    (EEXIST, "EEXIST"),
    (ENOTDIR, "ENOTDIR"),
    (EISDIR, "EISDIR"),
    (EINVAL, "EINVAL"),
];

pub fn name(errno: i32) -> Option<&'static str> {
    NAMES.iter().find(|(n, _)| *n == errno).map(|(_, s)| *s)
}

pub fn from_name(name: &str) -> Option<i32> {
    NAMES.iter().find(|(_, s)| *s == name).map(|(n, _)| *n)
}

/// `EACCES (13)`, or just the number when unnamed.
pub fn describe(errno: i32) -> String {
    match name(errno) {
        Some(s) => format!("{s} ({errno})"),
        None => errno.to_string(),
    }
}
