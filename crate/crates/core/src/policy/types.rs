use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// A user account.
    UserId,
    "u"
);
id_type!(
    /// A running subject (process).
    SubjectId,
    "s"
);
id_type!(
    /// An entity: an object (file) or a container (directory).
    EntityId,
    "e"
);
id_type!(
    /// A role.
    RoleId,
    "r"
);

/// Model file descriptor number, scoped per subject.
pub type Fd = u32;

/// Integrity level. Integrity is a chain: 0 is the lowest trust.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct IntegrityLevel(pub u32);

impl fmt::Display for IntegrityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "int{}", self.0)
    }
}

/// Confidentiality label: a level plus a set of categories, ordered
/// componentwise.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecurityLabel {
    pub level: u32,
    #[serde(rename = "cats")]
    pub categories: BTreeSet<u32>,
}

impl SecurityLabel {
    pub fn new(level: u32, categories: impl IntoIterator<Item = u32>) -> Self {
        Self {
            level,
            categories: categories.into_iter().collect(),
        }
    }

    pub fn bottom() -> Self {
        Self::default()
    }

    /// `self` is dominated by `other`.
    pub fn leq(&self, other: &SecurityLabel) -> bool {
        self.level <= other.level && self.categories.is_subset(&other.categories)
    }

    pub fn join(&self, other: &SecurityLabel) -> SecurityLabel {
        SecurityLabel {
            level: self.level.max(other.level),
            categories: self.categories.union(&other.categories).copied().collect(),
        }
    }

    pub fn meet(&self, other: &SecurityLabel) -> SecurityLabel {
        SecurityLabel {
            level: self.level.min(other.level),
            categories: self
                .categories
                .intersection(&other.categories)
                .copied()
                .collect(),
        }
    }
}

impl PartialOrd for SecurityLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering;
        match (self.leq(other), other.leq(self)) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        }
    }
}

impl fmt::Display for SecurityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{{", self.level)?;
        for (i, c) in self.categories.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("})")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AccessKind {
    #[serde(rename = "read")]
    ReadA,
    #[serde(rename = "write")]
    WriteA,
    #[serde(rename = "own")]
    OwnA,
}

impl AccessKind {
    pub const ALL: [AccessKind; 3] = [AccessKind::ReadA, AccessKind::WriteA, AccessKind::OwnA];
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessKind::ReadA => "ReadA",
            AccessKind::WriteA => "WriteA",
            AccessKind::OwnA => "OwnA",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleKind {
    Ordinary,
    Administrative,
    Negative,
}

impl RoleKind {
    pub const ALL: [RoleKind; 3] = [RoleKind::Ordinary, RoleKind::Administrative, RoleKind::Negative];
}

/// An open model file descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpenFile {
    pub entity: EntityId,
    pub kinds: BTreeSet<AccessKind>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn label() -> impl Strategy<Value = SecurityLabel> {
        (0u32..4, proptest::collection::btree_set(0u32..4, 0..4))
            .prop_map(|(level, categories)| SecurityLabel { level, categories })
    }

    proptest! {
        #[test]
        fn leq_is_a_partial_order(a in label(), b in label(), c in label()) {
            prop_assert!(a.leq(&a));
            if a.leq(&b) && b.leq(&a) {
                prop_assert_eq!(&a, &b);
            }
            if a.leq(&b) && b.leq(&c) {
                prop_assert!(a.leq(&c));
            }
        }

        #[test]
        fn join_and_meet_are_bounds(a in label(), b in label()) {
            let j = a.join(&b);
            let m = a.meet(&b);
            prop_assert!(a.leq(&j) && b.leq(&j));
            prop_assert!(m.leq(&a) && m.leq(&b));
        }

        #[test]
        fn absorption(a in label(), b in label()) {
            prop_assert_eq!(a.join(&a.meet(&b)), a.clone());
            prop_assert_eq!(a.meet(&a.join(&b)), a);
        }
    }

    #[test]
    fn incomparable_labels() {
        let a = SecurityLabel::new(1, [0]);
        let b = SecurityLabel::new(0, [1]);
        assert_eq!(a.partial_cmp(&b), None);
        assert!(SecurityLabel::bottom() < a);
        assert_eq!(a.to_string(), "(1,{0})");
    }
}
