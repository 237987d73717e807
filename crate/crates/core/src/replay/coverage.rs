use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graphs::{Conjunct, EventNode, GraphCatalog, SyscallGraph, WalkObserver};
use crate::policy::invariants::{invariant_names, Probe};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjunctCounts {
    #[serde(rename = "true")]
    pub held: u64,
    #[serde(rename = "false")]
    pub failed: u64,
}

impl ConjunctCounts {
    pub fn covered(&self) -> bool {
        self.held > 0 && self.failed > 0
    }
}

/// Raw observation counts. Fractions are derived, so merging two reports is
/// plain addition and order does not matter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageReport {
    /// Visits per node, per graph.
    pub graphs: BTreeMap<String, BTreeMap<String, u64>>,
    /// Keyed `graph.conjunct`.
    pub guard_conjuncts: BTreeMap<String, ConjunctCounts>,
    /// Non-vacuous instances checked, per invariant.
    pub invariants: BTreeMap<String, u64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl CoverageReport {
    /// Every node, conjunct and invariant present with a zero count.
    pub fn for_catalog(catalog: &GraphCatalog) -> Self {
        let mut r = CoverageReport::default();
        for g in catalog.graphs() {
            r.graphs.insert(
                g.syscall.to_owned(),
                g.nodes.iter().map(|n| (n.name.to_owned(), 0)).collect(),
            );
            for c in &g.conjuncts {
                r.guard_conjuncts
                    .insert(format!("{}.{}", g.syscall, c.name), ConjunctCounts::default());
            }
        }
        for name in invariant_names() {
            r.invariants.insert(name.to_owned(), 0);
        }
        r
    }

    pub fn record_probe(&mut self, probe: &Probe) {
        for (name, n) in &probe.instances {
            *self.invariants.entry((*name).to_owned()).or_default() += *n as u64;
        }
    }

    pub fn merge(&mut self, other: &CoverageReport) {
        for (g, nodes) in &other.graphs {
            let mine = self.graphs.entry(g.clone()).or_default();
            for (n, c) in nodes {
                *mine.entry(n.clone()).or_default() += c;
            }
        }
        for (k, c) in &other.guard_conjuncts {
            let mine = self.guard_conjuncts.entry(k.clone()).or_default();
            mine.held += c.held;
            mine.failed += c.failed;
        }
        for (k, c) in &other.invariants {
            *self.invariants.entry(k.clone()).or_default() += c;
        }
    }

    pub fn graph_fraction(&self, graph: &str) -> f64 {
        self.graphs.get(graph).map_or(0.0, |nodes| {
            ratio(nodes.values().filter(|c| **c > 0).count(), nodes.len())
        })
    }

    /// Visited nodes over all nodes of all graphs.
    pub fn node_fraction(&self) -> f64 {
        let all = self.graphs.values().flat_map(|n| n.values());
        let (seen, total) = all.fold((0, 0), |(s, t), c| (s + (*c > 0) as usize, t + 1));
        ratio(seen, total)
    }

    /// Conjuncts observed both true and false, over all conjuncts.
    pub fn conjunct_fraction(&self) -> f64 {
        ratio(
            self.guard_conjuncts.values().filter(|c| c.covered()).count(),
            self.guard_conjuncts.len(),
        )
    }

    pub fn invariant_fraction(&self) -> f64 {
        ratio(
            self.invariants.values().filter(|c| **c > 0).count(),
            self.invariants.len(),
        )
    }

    pub fn uncovered_conjuncts(&self) -> impl Iterator<Item = (&str, &ConjunctCounts)> {
        self.guard_conjuncts
            .iter()
            .filter(|(_, c)| !c.covered())
            .map(|(k, c)| (k.as_str(), c))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coverage serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl WalkObserver for CoverageReport {
    fn node(&mut self, graph: &SyscallGraph, node: &EventNode) {
        *self
            .graphs
            .entry(graph.syscall.to_owned())
            .or_default()
            .entry(node.name.to_owned())
            .or_default() += 1;
    }

    fn conjunct(&mut self, graph: &SyscallGraph, conjunct: &Conjunct, holds: bool) {
        let c = self
            .guard_conjuncts
            .entry(format!("{}.{}", graph.syscall, conjunct.name))
            .or_default();
        if holds {
            c.held += 1;
        } else {
            c.failed += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::bundled_catalog;

    #[test]
    fn fresh_report_is_all_zero() {
        let r = CoverageReport::for_catalog(&bundled_catalog());
        assert_eq!(r.graphs.len(), 7);
        assert_eq!(r.conjunct_fraction(), 0.0);
        assert_eq!(r.node_fraction(), 0.0);
        assert!(r.invariants.len() >= 20);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = CoverageReport::default();
        a.guard_conjuncts.insert("open.x".into(), ConjunctCounts { held: 1, failed: 0 });
        let mut b = CoverageReport::default();
        b.guard_conjuncts.insert("open.x".into(), ConjunctCounts { held: 0, failed: 2 });
        b.invariants.insert("RBAC".into(), 3);
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab, ba);
        assert_eq!(ab.conjunct_fraction(), 1.0);
        assert_eq!(CoverageReport::from_json(&ab.to_json()).unwrap(), ab);
    }
}
