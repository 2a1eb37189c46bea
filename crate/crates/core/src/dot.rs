//! Graphviz export of cubic graphs.

use std::fmt::Write as _;

use crate::inference::CubicGraph;
use crate::kb::{KnowledgeBase, VarKind};

/// Renders a cubic graph as DOT: one cluster per slice, cross-slice linkage as
/// dashed edges, abnormal evidence filled. Emission order is sorted, so equal
/// graphs give identical text.
pub fn export_dot(graph: &CubicGraph, kb: &KnowledgeBase) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph cubic_B{} {{", graph.root);
    out.push_str("  rankdir=TB;\n  node [fontname=\"Helvetica\"];\n");

    let step_of = |i: usize| match graph.slices[i].step {
        0 => i + 1,
        m => m,
    };
    let node = |var: crate::kb::VarId, i: usize| format!("\"{}_{}\"", var, step_of(i));

    for (i, slice) in graph.slices.iter().enumerate() {
        let m = step_of(i);
        let _ = writeln!(out, "  subgraph cluster_t{m} {{");
        let _ = writeln!(out, "    label=\"t_{m}\";");
        for (&var, &state) in &slice.variables {
            let v = kb.variable(var);
            let symbol = v.map_or_else(|| format!("?{var}"), |v| v.symbol());
            let shape = match v.map(|v| v.kind) {
                Some(VarKind::B) => "box",
                Some(VarKind::D) => "diamond",
                _ => "ellipse",
            };
            let label = match state {
                Some(s) => format!("{symbol},{s}"),
                None => symbol,
            };
            let abnormal = matches!((v, state), (Some(v), Some(s)) if v.is_abnormal(s));
            let style = if abnormal { ", style=filled, fillcolor=\"#f4a6a6\"" } else { "" };
            let _ = writeln!(out, "    {} [label=\"{label}\", shape={shape}{style}];", node(var, i));
        }
        let mut edges: Vec<_> = slice.arcs.iter().map(|id| kb.arc(*id)).map(|a| (a.parent, a.child)).collect();
        edges.sort();
        edges.dedup();
        for (p, c) in edges {
            let _ = writeln!(out, "    {} -> {};", node(p, i), node(c, i));
        }
        out.push_str("  }\n");
    }

    let mut links = graph.linkage.clone();
    links.sort();
    for l in links {
        let _ = writeln!(
            out,
            "  {} -> {} [style=dashed, arrowhead=none, constraint=false];",
            node(l.var, l.from),
            node(l.var, l.to)
        );
    }
    out.push_str("}\n");
    out
}
