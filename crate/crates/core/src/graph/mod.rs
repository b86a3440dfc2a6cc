//! Directed graphs, d-separation and mechanised graphs.

mod mechanised;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

pub use mechanised::{
    build_mechanised_graph, build_mechanised_graph_with, r_relevant, reachability_paths, Disjunct, MechanisedGraph,
    NodeId, ReachabilityPath,
};

use crate::error::{Error, Result};
use crate::model::CausalGame;

/// A directed graph over named nodes; cycles are allowed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiGraph {
    names: Vec<String>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
}

impl DiGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// The object-level graph of a game.
    pub fn of_game(game: &CausalGame) -> Self {
        let mut g = DiGraph::new();
        for name in game.names() {
            g.add_node(name);
        }
        for e in game.entries() {
            for p in &e.parents {
                g.add_edge(p, &e.variable.name);
            }
        }
        g
    }

    /// Adds a node if absent and returns its index.
    pub fn add_node(&mut self, name: &str) -> usize {
        if let Some(i) = self.index(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.out.push(Vec::new());
        self.inc.push(Vec::new());
        self.names.len() - 1
    }

    pub fn add_edge(&mut self, from: &str, to: &str) {
        let a = self.add_node(from);
        let b = self.add_node(to);
        if !self.out[a].contains(&b) {
            self.out[a].push(b);
            self.inc[b].push(a);
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn nodes(&self) -> &[String] {
        &self.names
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.index(from), self.index(to)) {
            (Some(a), Some(b)) => self.out[a].contains(&b),
            _ => false,
        }
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (a, kids) in self.out.iter().enumerate() {
            for &b in kids {
                out.push((self.names[a].clone(), self.names[b].clone()));
            }
        }
        out
    }

    pub fn parents(&self, name: &str) -> Vec<&str> {
        self.index(name)
            .map(|i| self.inc[i].iter().map(|&j| self.name(j)).collect())
            .unwrap_or_default()
    }

    pub fn children(&self, name: &str) -> Vec<&str> {
        self.index(name)
            .map(|i| self.out[i].iter().map(|&j| self.name(j)).collect())
            .unwrap_or_default()
    }

    fn resolve(&self, set: &[&str]) -> Result<Vec<usize>> {
        set.iter()
            .map(|n| self.index(n).ok_or_else(|| Error::UnknownNode(n.to_string())))
            .collect()
    }

    /// Nodes with a directed path into `set`, including `set` itself.
    fn ancestors_of(&self, set: &[usize]) -> Vec<bool> {
        let mut mark = vec![false; self.names.len()];
        let mut stack = set.to_vec();
        for &s in set {
            mark[s] = true;
        }
        while let Some(n) = stack.pop() {
            for &p in &self.inc[n] {
                if !mark[p] {
                    mark[p] = true;
                    stack.push(p);
                }
            }
        }
        mark
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The edge points from the earlier node to the later one.
    Forward,
    Backward,
}

/// A sequence of distinct adjacent nodes with the orientation of each edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Path {
    pub nodes: Vec<String>,
    pub directions: Vec<Direction>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Nodes entered through an edge pointing into them.
    pub fn heads(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for (k, d) in self.directions.iter().enumerate() {
            match d {
                Direction::Forward => out.push(self.nodes[k + 1].as_str()),
                Direction::Backward => out.push(self.nodes[k].as_str()),
            }
        }
        out
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.nodes[0])?;
        for (k, d) in self.directions.iter().enumerate() {
            let arrow = match d {
                Direction::Forward => " -> ",
                Direction::Backward => " <- ",
            };
            write!(f, "{arrow}{}", self.nodes[k + 1])?;
        }
        Ok(())
    }
}

fn check_disjoint(x: &[usize], z: &[usize], y: &[usize]) -> Result<()> {
    let xs: HashSet<_> = x.iter().collect();
    let zs: HashSet<_> = z.iter().collect();
    if y.iter().any(|n| xs.contains(n) || zs.contains(n)) || xs.iter().any(|n| zs.contains(n)) {
        return Err(Error::NotApplicable("d-separation sets must be disjoint".into()));
    }
    Ok(())
}

/// Whether `y` blocks every path between `x` and `z`.
///
/// Walks (node, arrived-along-edge) states: a node passes traffic on when it
/// is a non-collider outside `y`, or a collider that is in `y` or has a
/// descendant in `y`.
pub fn d_separated(graph: &DiGraph, x: &[&str], z: &[&str], y: &[&str]) -> Result<bool> {
    let (xi, zi, yi) = (graph.resolve(x)?, graph.resolve(z)?, graph.resolve(y)?);
    check_disjoint(&xi, &zi, &yi)?;
    let n = graph.names.len();
    let in_y: Vec<bool> = (0..n).map(|i| yi.contains(&i)).collect();
    let in_z: Vec<bool> = (0..n).map(|i| zi.contains(&i)).collect();
    let opens_collider = graph.ancestors_of(&yi);
    // visited[node][0]: reached against an edge (from a child),
    // visited[node][1]: reached along an edge (from a parent).
    let mut visited = vec![[false; 2]; n];
    let mut stack: Vec<(usize, usize)> = xi.iter().map(|&s| (s, 0)).collect();
    while let Some((node, along)) = stack.pop() {
        if visited[node][along] {
            continue;
        }
        visited[node][along] = true;
        if in_z[node] {
            return Ok(false);
        }
        let is_start = along == 0 && xi.contains(&node);
        if along == 0 {
            if in_y[node] && !is_start {
                continue;
            }
            for &p in &graph.inc[node] {
                stack.push((p, 0));
            }
            for &c in &graph.out[node] {
                stack.push((c, 1));
            }
        } else {
            if !in_y[node] {
                for &c in &graph.out[node] {
                    stack.push((c, 1));
                }
            }
            if opens_collider[node] {
                for &p in &graph.inc[node] {
                    stack.push((p, 0));
                }
            }
        }
    }
    Ok(true)
}

/// Whether an explicit path is unblocked by `y`.
pub fn path_is_active(graph: &DiGraph, path: &Path, y: &[&str]) -> Result<bool> {
    let yi = graph.resolve(y)?;
    let opens = graph.ancestors_of(&yi);
    for k in 1..path.nodes.len().saturating_sub(1) {
        let w = graph
            .index(&path.nodes[k])
            .ok_or_else(|| Error::UnknownNode(path.nodes[k].clone()))?;
        let collider = path.directions[k - 1] == Direction::Forward && path.directions[k] == Direction::Backward;
        let blocked = if collider { !opens[w] } else { yi.contains(&w) };
        if blocked {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every simple path from `x` to `z` left unblocked by `y`. Paths end at the
/// first node of `z` they reach.
pub fn active_paths(graph: &DiGraph, x: &[&str], z: &[&str], y: &[&str]) -> Result<Vec<Path>> {
    let (xi, zi, yi) = (graph.resolve(x)?, graph.resolve(z)?, graph.resolve(y)?);
    check_disjoint(&xi, &zi, &yi)?;
    let opens = graph.ancestors_of(&yi);
    let ctx = Search {
        graph,
        z: zi.iter().copied().collect(),
        y: yi.iter().copied().collect(),
        opens,
    };
    let mut out = BTreeSet::new();
    for &s in &xi {
        let mut nodes = vec![s];
        let mut dirs = Vec::new();
        let mut on_path = vec![false; graph.names.len()];
        on_path[s] = true;
        ctx.extend(&mut nodes, &mut dirs, &mut on_path, &mut out);
    }
    Ok(out.into_iter().collect())
}

struct Search<'a> {
    graph: &'a DiGraph,
    z: HashSet<usize>,
    y: HashSet<usize>,
    opens: Vec<bool>,
}

impl Search<'_> {
    fn extend(
        &self,
        nodes: &mut Vec<usize>,
        dirs: &mut Vec<Direction>,
        on_path: &mut [bool],
        out: &mut BTreeSet<Path>,
    ) {
        let last = *nodes.last().expect("non-empty");
        if nodes.len() > 1 && self.z.contains(&last) {
            out.insert(Path {
                nodes: nodes.iter().map(|&i| self.graph.name(i).to_string()).collect(),
                directions: dirs.clone(),
            });
            return;
        }
        let steps = self.graph.out[last]
            .iter()
            .map(|&n| (n, Direction::Forward))
            .chain(self.graph.inc[last].iter().map(|&n| (n, Direction::Backward)));
        for (next, dir) in steps {
            if on_path[next] {
                continue;
            }
            // `last` becomes an interior node; check it now.
            if let Some(&prev) = dirs.last() {
                let collider = prev == Direction::Forward && dir == Direction::Backward;
                let blocked = if collider {
                    !self.opens[last]
                } else {
                    self.y.contains(&last)
                };
                if blocked {
                    continue;
                }
            }
            nodes.push(next);
            dirs.push(dir);
            on_path[next] = true;
            self.extend(nodes, dirs, on_path, out);
            on_path[next] = false;
            nodes.pop();
            dirs.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job_market_graph() -> DiGraph {
        let mut g = DiGraph::new();
        for (a, b) in [
            ("T", "D1"),
            ("T", "U1"),
            ("T", "U2"),
            ("D1", "D2"),
            ("D1", "U1"),
            ("D2", "U1"),
            ("D2", "U2"),
        ] {
            g.add_edge(a, b);
        }
        g
    }

    #[test]
    fn utilities_connected_through_forks() {
        let g = job_market_graph();
        assert!(!d_separated(&g, &["U2"], &["U1"], &[]).unwrap());
        let paths = active_paths(&g, &["U2"], &["U1"], &[]).unwrap();
        let shown: Vec<String> = paths.iter().map(ToString::to_string).collect();
        assert!(shown.contains(&"U2 <- T -> U1".to_string()));
        assert!(shown.contains(&"U2 <- D2 -> U1".to_string()));
    }

    #[test]
    fn conditioning_on_forks_separates() {
        let g = job_market_graph();
        assert!(d_separated(&g, &["U2"], &["U1"], &["T", "D2"]).unwrap());
        assert!(active_paths(&g, &["U2"], &["U1"], &["T", "D2"]).unwrap().is_empty());
    }

    #[test]
    fn chains_colliders_and_isolated_nodes() {
        let mut g = DiGraph::new();
        g.add_edge("A", "B");
        g.add_edge("B", "C");
        g.add_edge("A", "E");
        g.add_edge("C", "E");
        g.add_edge("E", "F");
        g.add_node("Z");
        assert!(d_separated(&g, &["A"], &["C"], &["B"]).unwrap());
        assert!(!d_separated(&g, &["A"], &["C"], &["B", "E"]).unwrap());
        assert!(!d_separated(&g, &["A"], &["C"], &["B", "F"]).unwrap());
        assert!(d_separated(&g, &["A"], &["Z"], &["B"]).unwrap());
        assert!(active_paths(&g, &["A"], &["Z"], &[]).unwrap().is_empty());
    }

    #[test]
    fn cyclic_graphs_are_accepted() {
        let mut g = DiGraph::new();
        g.add_edge("A", "B");
        g.add_edge("B", "A");
        g.add_edge("B", "C");
        assert!(!d_separated(&g, &["A"], &["C"], &[]).unwrap());
        assert_eq!(active_paths(&g, &["A"], &["C"], &[]).unwrap().len(), 2);
        assert!(d_separated(&g, &["A"], &["C"], &["B"]).unwrap());
    }

    #[test]
    fn unknown_nodes_error() {
        let g = job_market_graph();
        assert!(matches!(
            d_separated(&g, &["Q"], &["U1"], &[]),
            Err(Error::UnknownNode(_))
        ));
    }
}
