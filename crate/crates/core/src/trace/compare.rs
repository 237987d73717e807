use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Display};

use serde::Serialize;

use crate::policy::PolicyState;

/// One field-level difference between an expected and an actual state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Divergence {
    pub field: &'static str,
    pub key: String,
    pub expected: String,
    pub actual: String,
}

impl Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}]: expected {}, got {}",
            self.field, self.key, self.expected, self.actual
        )
    }
}

const PRESENT: &str = "present";
const ABSENT: &str = "absent";

fn set<T: Ord + Display>(out: &mut Vec<Divergence>, field: &'static str, a: &BTreeSet<T>, b: &BTreeSet<T>) {
    for x in a.symmetric_difference(b) {
        let here = a.contains(x);
        out.push(Divergence {
            field,
            key: x.to_string(),
            expected: if here { PRESENT } else { ABSENT }.into(),
            actual: if here { ABSENT } else { PRESENT }.into(),
        });
    }
}

fn scalar<K: Ord + Display, V: PartialEq + fmt::Debug>(
    out: &mut Vec<Divergence>,
    field: &'static str,
    a: &BTreeMap<K, V>,
    b: &BTreeMap<K, V>,
    show: impl Fn(&V) -> String,
) {
    let keys: BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    for k in keys {
        let (x, y) = (a.get(k), b.get(k));
        if x != y {
            let render = |v: Option<&V>| v.map_or_else(|| ABSENT.to_owned(), &show);
            out.push(Divergence {
                field,
                key: k.to_string(),
                expected: render(x),
                actual: render(y),
            });
        }
    }
}

/// Set-valued maps compare element-wise, so a missing key and an empty set
/// are the same thing.
fn relation<K, T>(
    out: &mut Vec<Divergence>,
    field: &'static str,
    a: &BTreeMap<K, BTreeSet<T>>,
    b: &BTreeMap<K, BTreeSet<T>>,
    show: impl Fn(&K, &T) -> String,
) where
    K: Ord,
    T: Ord,
{
    let keys: BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    let empty = BTreeSet::new();
    for k in keys {
        let x = a.get(k).unwrap_or(&empty);
        let y = b.get(k).unwrap_or(&empty);
        for t in x.symmetric_difference(y) {
            let here = x.contains(t);
            out.push(Divergence {
                field,
                key: show(k, t),
                expected: if here { PRESENT } else { ABSENT }.into(),
                actual: if here { ABSENT } else { PRESENT }.into(),
            });
        }
    }
}

/// Field-by-field differences, `expected` taken from the first argument.
/// Empty exactly when the states are equivalent.
pub fn compare_states(expected: &PolicyState, actual: &PolicyState) -> Vec<Divergence> {
    let (a, b) = (expected, actual);
    let mut out = Vec::new();
    set(&mut out, "users", &a.users, &b.users);
    scalar(&mut out, "user_int", &a.user_int, &b.user_int, |v| v.to_string());
    scalar(&mut out, "user_sec", &a.user_sec, &b.user_sec, |v| v.to_string());
    relation(&mut out, "user_roles", &a.user_roles, &b.user_roles, |u, r| {
        format!("({u},{r})")
    });
    set(&mut out, "subjects", &a.subjects, &b.subjects);
    scalar(&mut out, "subject_owner", &a.subject_owner, &b.subject_owner, |v| v.to_string());
    scalar(&mut out, "subject_int", &a.subject_int, &b.subject_int, |v| v.to_string());
    scalar(&mut out, "subject_sec", &a.subject_sec, &b.subject_sec, |v| v.to_string());
    relation(
        &mut out,
        "subject_accesses",
        &a.subject_accesses,
        &b.subject_accesses,
        |s, (e, k)| format!("({s},{e},{k})"),
    );
    let fds = |st: &PolicyState| -> BTreeMap<String, String> {
        st.subject_fds
            .iter()
            .flat_map(|(s, m)| {
                m.iter().map(move |(fd, of)| {
                    let kinds: Vec<String> = of.kinds.iter().map(|k| k.to_string()).collect();
                    (format!("({s},fd{fd})"), format!("{} [{}]", of.entity, kinds.join(",")))
                })
            })
            .collect()
    };
    scalar(&mut out, "subject_fds", &fds(a), &fds(b), |v| v.clone());
    set(&mut out, "entities", &a.entities, &b.entities);
    scalar(
        &mut out,
        "entity_is_container",
        &a.entity_is_container,
        &b.entity_is_container,
        |v| v.to_string(),
    );
    scalar(&mut out, "entity_parent", &a.entity_parent, &b.entity_parent, |v| v.to_string());
    scalar(&mut out, "entity_name", &a.entity_name, &b.entity_name, |v| format!("{v:?}"));
    scalar(&mut out, "entity_int", &a.entity_int, &b.entity_int, |v| v.to_string());
    scalar(&mut out, "entity_sec", &a.entity_sec, &b.entity_sec, |v| v.to_string());
    set(&mut out, "roles", &a.roles, &b.roles);
    scalar(&mut out, "role_kind", &a.role_kind, &b.role_kind, |v| format!("{v:?}"));
    relation(&mut out, "role_rights", &a.role_rights, &b.role_rights, |r, (e, k)| {
        format!("({r},{e},{k})")
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{AccessKind, EntityId, SubjectId};

    #[test]
    fn equal_states_do_not_diverge() {
        assert!(compare_states(&PolicyState::empty(), &PolicyState::empty()).is_empty());
    }

    #[test]
    fn missing_access_pair() {
        let (s, e) = (SubjectId(1), EntityId(2));
        let mut expected = PolicyState::empty();
        expected
            .subject_accesses
            .insert(s, [(e, AccessKind::WriteA)].into());
        let mut actual = PolicyState::empty();
        actual.subject_accesses.insert(s, BTreeSet::new());
        assert_eq!(
            compare_states(&expected, &actual),
            vec![Divergence {
                field: "subject_accesses",
                key: "(s1,e2,WriteA)".into(),
                expected: "present".into(),
                actual: "absent".into(),
            }]
        );
    }
}
