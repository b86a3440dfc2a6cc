//! Graphviz text for the object-level and mechanised graphs.

use std::fmt::Write as _;

use crate::error::Result;
use crate::graph::{build_mechanised_graph, NodeId};
use crate::model::{CausalGame, VarKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DotKind {
    Object,
    Mechanised,
    /// Mechanised graph without the edges between mechanisms.
    Independent,
}

impl std::str::FromStr for DotKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "object" => Ok(DotKind::Object),
            "mechanised" | "mechanized" => Ok(DotKind::Mechanised),
            "independent" => Ok(DotKind::Independent),
            _ => Err(format!("unknown graph kind `{s}` (object, mechanised, independent)")),
        }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn colour(agent: Option<usize>) -> &'static str {
    match agent {
        Some(a) if a > 0 => PALETTE[(a - 1) % PALETTE.len()],
        _ => "black",
    }
}

fn pretty(node: &NodeId) -> String {
    match node {
        NodeId::Var(v) => v.clone(),
        NodeId::Param(v) => format!("Θ_{v}"),
        NodeId::Rule(v) => format!("Π_{v}"),
    }
}

/// Nodes follow game order, each mechanism node right before its variable;
/// edges follow their source.
pub fn export_dot(game: &CausalGame, kind: DotKind) -> Result<String> {
    let name = match kind {
        DotKind::Object => "object",
        DotKind::Mechanised => "mechanised",
        DotKind::Independent => "independent",
    };
    let mut out = String::new();
    let _ = writeln!(out, "digraph {name} {{");
    if game.is_empty() {
        out.push_str("}\n");
        return Ok(out);
    }
    out.push_str("  rankdir=TB;\n");
    let mech = build_mechanised_graph(game)?;
    for e in game.entries() {
        let v = &e.variable;
        if kind != DotKind::Object {
            let m = if v.is_decision() {
                NodeId::rule(&v.name)
            } else {
                NodeId::param(&v.name)
            };
            let shape = if v.is_decision() { "box" } else { "ellipse" };
            let _ = writeln!(
                out,
                "  \"{m}\" [label=\"{}\", shape={shape}, style=dashed, color=\"{}\"];",
                pretty(&m),
                colour(v.agent)
            );
        }
        let shape = match v.kind {
            VarKind::Chance => "ellipse",
            VarKind::Decision => "box",
            VarKind::Utility => "diamond",
        };
        let _ = writeln!(out, "  \"{}\" [shape={shape}, color=\"{}\"];", v.name, colour(v.agent));
    }
    for e in game.entries() {
        let name = &e.variable.name;
        if kind != DotKind::Object {
            let m = if e.variable.is_decision() {
                NodeId::rule(name)
            } else {
                NodeId::param(name)
            };
            let _ = writeln!(out, "  \"{m}\" -> \"{name}\" [style=dashed];");
        }
        for c in game.children(name) {
            let _ = writeln!(out, "  \"{name}\" -> \"{c}\";");
        }
    }
    if kind == DotKind::Mechanised {
        for (a, b) in mech.inter_edges() {
            let _ = writeln!(out, "  \"{a}\" -> \"{b}\" [color=grey];");
        }
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::fixtures::job_market;

    #[test]
    fn empty_game_is_header_only() {
        let g = CausalGame::empty(1);
        assert_eq!(
            export_dot(&g, DotKind::Mechanised).unwrap(),
            "digraph mechanised {\n}\n"
        );
    }

    #[test]
    fn mechanised_job_market_edges() {
        let g = job_market();
        let text = export_dot(&g, DotKind::Mechanised).unwrap();
        let grey: Vec<&str> = text.lines().filter(|l| l.contains("color=grey")).collect();
        assert_eq!(grey.len(), 6);
        assert!(text.contains("\"PI_D1\" -> \"PI_D2\" [color=grey];"));
        assert!(text.contains("\"THETA_T\" -> \"T\" [style=dashed];"));
        let independent = export_dot(&g, DotKind::Independent).unwrap();
        assert!(!independent.contains("grey"));
        let object = export_dot(&g, DotKind::Object).unwrap();
        assert!(!object.contains("THETA"));
        assert!(object.contains("\"T\" -> \"D1\";"));
        assert_eq!(text, export_dot(&g, DotKind::Mechanised).unwrap());
    }
}
