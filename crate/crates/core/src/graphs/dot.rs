use std::fmt::Write;

use super::graph::{Effect, NodeKind, SyscallGraph};

/// Graphviz rendering. Nodes show their guard conjuncts and the event they
/// refine; arcs carry their condition label.
pub fn to_dot(graph: &SyscallGraph) -> String {
    let mut out = String::new();
    writeln!(out, "digraph \"{}\" {{", graph.syscall).unwrap();
    writeln!(out, "  rankdir=TB;").unwrap();
    writeln!(out, "  node [shape=box, fontname=monospace];").unwrap();
    for n in &graph.nodes {
        let mut label = n.name.to_owned();
        match n.effect {
            Effect::Skip => {}
            Effect::Refines { event, .. } => write!(label, "\\n{event}").unwrap(),
            Effect::Local { what, .. } => write!(label, "\\n[{what}]").unwrap(),
        }
        for g in &n.guard {
            write!(label, "\\l  {g}").unwrap();
        }
        if !n.guard.is_empty() {
            label.push_str("\\l");
        }
        let style = match n.kind {
            NodeKind::Initial => ", style=bold",
            NodeKind::Inner => "",
            NodeKind::Final => ", peripheries=2",
        };
        writeln!(out, "  \"{}\" [label=\"{label}\"{style}];", n.name).unwrap();
    }
    for n in &graph.nodes {
        for a in &n.arcs {
            writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"];", n.name, a.to, a.label).unwrap();
        }
    }
    out.push_str("}\n");
    out
}
