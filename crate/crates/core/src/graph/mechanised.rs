use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{active_paths, d_separated, DiGraph, Path};
use crate::model::{CausalGame, DecisionStatus};

/// A node of the mechanised graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Var(String),
    /// Parameter node of a chance or utility variable.
    Param(String),
    /// Decision-rule node of a decision.
    Rule(String),
}

impl NodeId {
    pub fn param(name: &str) -> Self {
        NodeId::Param(name.to_string())
    }

    pub fn rule(name: &str) -> Self {
        NodeId::Rule(name.to_string())
    }

    pub fn var(name: &str) -> Self {
        NodeId::Var(name.to_string())
    }

    /// Accepts `PI_D`, `THETA_V`, the Greek forms `Π_D`, `Θ_V`, or a plain
    /// variable name.
    pub fn parse(text: &str) -> Self {
        for (prefix, rule) in [("PI_", true), ("Π_", true), ("THETA_", false), ("Θ_", false)] {
            if let Some(rest) = text.strip_prefix(prefix) {
                return if rule { NodeId::rule(rest) } else { NodeId::param(rest) };
            }
        }
        NodeId::var(text)
    }

    pub fn variable(&self) -> &str {
        match self {
            NodeId::Var(v) | NodeId::Param(v) | NodeId::Rule(v) => v,
        }
    }

    pub fn is_mechanism(&self) -> bool {
        !matches!(self, NodeId::Var(_))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Var(v) => f.write_str(v),
            NodeId::Param(v) => write!(f, "THETA_{v}"),
            NodeId::Rule(v) => write!(f, "PI_{v}"),
        }
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// The object-level graph plus mechanism nodes and the relevance edges
/// between mechanisms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MechanisedGraph {
    object_nodes: Vec<String>,
    object_edges: Vec<(String, String)>,
    mechanism_nodes: Vec<NodeId>,
    mechanism_edges: Vec<(NodeId, String)>,
    inter_edges: BTreeSet<(NodeId, NodeId)>,
}

impl MechanisedGraph {
    pub fn object_nodes(&self) -> &[String] {
        &self.object_nodes
    }

    pub fn object_edges(&self) -> &[(String, String)] {
        &self.object_edges
    }

    pub fn mechanism_nodes(&self) -> &[NodeId] {
        &self.mechanism_nodes
    }

    /// Edges from each mechanism node into its variable.
    pub fn mechanism_edges(&self) -> &[(NodeId, String)] {
        &self.mechanism_edges
    }

    pub fn inter_edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.inter_edges
    }

    pub fn has_inter_edge(&self, from: &NodeId, to: &NodeId) -> bool {
        self.inter_edges.contains(&(from.clone(), to.clone()))
    }

    /// The full mechanised graph as a plain digraph.
    pub fn to_digraph(&self) -> DiGraph {
        let mut g = self.independent();
        for (a, b) in &self.inter_edges {
            g.add_edge(&a.to_string(), &b.to_string());
        }
        g
    }

    /// The graph without inter-mechanism edges.
    pub fn independent(&self) -> DiGraph {
        let mut g = DiGraph::new();
        for n in &self.object_nodes {
            g.add_node(n);
        }
        for m in &self.mechanism_nodes {
            g.add_node(&m.to_string());
        }
        for (a, b) in &self.object_edges {
            g.add_edge(a, b);
        }
        for (m, v) in &self.mechanism_edges {
            g.add_edge(&m.to_string(), v);
        }
        g
    }
}

/// Mechanised graph of `game` with no inter-mechanism edges.
fn skeleton(game: &CausalGame) -> MechanisedGraph {
    let mut mechanism_nodes = Vec::new();
    let mut mechanism_edges = Vec::new();
    for e in game.entries() {
        let name = &e.variable.name;
        if e.variable.is_decision() {
            let node = NodeId::rule(name);
            // A decision fixed at the object level no longer listens to its rule.
            if game.decision_status(name) != Some(DecisionStatus::ObjectFixed) {
                mechanism_edges.push((node.clone(), name.clone()));
            }
            mechanism_nodes.push(node);
        } else {
            let node = NodeId::param(name);
            mechanism_edges.push((node.clone(), name.clone()));
            mechanism_nodes.push(node);
        }
    }
    let mut object_edges = Vec::new();
    for e in game.entries() {
        for p in &e.parents {
            object_edges.push((p.clone(), e.variable.name.clone()));
        }
    }
    MechanisedGraph {
        object_nodes: game.names().map(str::to_string).collect(),
        object_edges,
        mechanism_nodes,
        mechanism_edges,
        inter_edges: BTreeSet::new(),
    }
}

/// Which test of the relevance criterion a reachability path witnesses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Disjunct {
    /// Connection to the agent's downstream utilities given the decision and
    /// its parents.
    Utility,
    /// Unconditional connection to the decision's parents.
    Observation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReachabilityPath {
    pub path: Path,
    pub conditioning: Vec<String>,
    pub disjunct: Disjunct,
}

struct Query {
    targets: Vec<String>,
    conditioning: Vec<String>,
    disjunct: Disjunct,
}

/// The two d-connection tests that make `mech` relevant to the rule of `decision`.
fn relevance_queries(game: &CausalGame, decision: &str) -> Result<Vec<Query>> {
    let entry = game.require(decision)?;
    let agent = entry.variable.agent.expect("decisions have agents");
    let desc = game.descendants(decision);
    let utilities: Vec<String> = game
        .utilities_of(agent)
        .into_iter()
        .filter(|u| desc.contains(*u))
        .map(str::to_string)
        .collect();
    let mut conditioning = vec![decision.to_string()];
    conditioning.extend(entry.parents.iter().cloned());
    Ok(vec![
        Query {
            targets: utilities,
            conditioning,
            disjunct: Disjunct::Utility,
        },
        Query {
            targets: entry.parents.clone(),
            conditioning: Vec::new(),
            disjunct: Disjunct::Observation,
        },
    ])
}

fn check_nodes(game: &CausalGame, sk: &MechanisedGraph, mech: &NodeId, target: &NodeId) -> Result<()> {
    let NodeId::Rule(d) = target else {
        return Err(Error::NotADecisionRule(target.to_string()));
    };
    if !game.variable(d).is_some_and(|v| v.is_decision()) {
        return Err(Error::NotADecisionRule(target.to_string()));
    }
    if !sk.mechanism_nodes.contains(mech) {
        return Err(Error::UnknownNode(mech.to_string()));
    }
    Ok(())
}

fn relevant_in(game: &CausalGame, graph: &DiGraph, mech: &NodeId, decision: &str) -> Result<bool> {
    let m = mech.to_string();
    for q in relevance_queries(game, decision)? {
        if q.targets.is_empty() {
            continue;
        }
        let t: Vec<&str> = q.targets.iter().map(String::as_str).collect();
        let c: Vec<&str> = q.conditioning.iter().map(String::as_str).collect();
        if !d_separated(graph, &[&m], &t, &c)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Whether the choice of rule at `target` can depend on the value of `mech`
/// under best-response rationality. Evaluated on the independent mechanised
/// graph.
pub fn r_relevant(game: &CausalGame, mech: &NodeId, target: &NodeId) -> Result<bool> {
    let sk = skeleton(game);
    check_nodes(game, &sk, mech, target)?;
    if mech == target {
        return Ok(false);
    }
    relevant_in(game, &sk.independent(), mech, target.variable())
}

/// All paths witnessing the relevance of `mech` to `target`, each with the
/// conditioning set it is active under. Empty iff `r_relevant` is false.
pub fn reachability_paths(game: &CausalGame, mech: &NodeId, target: &NodeId) -> Result<Vec<ReachabilityPath>> {
    let sk = skeleton(game);
    check_nodes(game, &sk, mech, target)?;
    if mech == target {
        return Ok(Vec::new());
    }
    let graph = sk.independent();
    let m = mech.to_string();
    let mut out = Vec::new();
    for q in relevance_queries(game, target.variable())? {
        if q.targets.is_empty() {
            continue;
        }
        let t: Vec<&str> = q.targets.iter().map(String::as_str).collect();
        let c: Vec<&str> = q.conditioning.iter().map(String::as_str).collect();
        for path in active_paths(&graph, &[&m], &t, &c)? {
            out.push(ReachabilityPath {
                path,
                conditioning: q.conditioning.clone(),
                disjunct: q.disjunct,
            });
        }
    }
    Ok(out)
}

/// Builds the mechanised graph with best-response relevance edges. Rule
/// nodes of committed decisions receive no incoming relevance edges since
/// their value is already set.
pub fn build_mechanised_graph(game: &CausalGame) -> Result<MechanisedGraph> {
    let graph = skeleton(game).independent();
    build_mechanised_graph_with(game, |g, mech, decision| relevant_in(g, &graph, mech, decision))
}

/// As [`build_mechanised_graph`] with a caller-supplied relevance test,
/// called as `criterion(game, mechanism, decision)`.
pub fn build_mechanised_graph_with<F>(game: &CausalGame, mut criterion: F) -> Result<MechanisedGraph>
where
    F: FnMut(&CausalGame, &NodeId, &str) -> Result<bool>,
{
    game.topological_order().map_err(Error::Cycle)?;
    let mut sk = skeleton(game);
    for d in game.decisions() {
        if game.decision_status(d) == Some(DecisionStatus::Committed) {
            continue;
        }
        let target = NodeId::rule(d);
        for mech in &sk.mechanism_nodes {
            if *mech != target && criterion(game, mech, d)? {
                sk.inter_edges.insert((mech.clone(), target.clone()));
            }
        }
    }
    Ok(sk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GameBuilder;

    fn job_market() -> CausalGame {
        GameBuilder::new(2)
            .chance("T", &["h", "l"], &[])
            .decision("D1", 1, &["g", "ng"], &["T"])
            .decision("D2", 2, &["j", "nj"], &["D1"])
            .utility("U1", 1, &[-2.0, -1.0, 0.0, 3.0, 4.0, 5.0], &["T", "D1", "D2"])
            .utility("U2", 2, &[-2.0, -1.0, 0.0, 3.0], &["T", "D2"])
            .cpd("T", vec![vec![0.5, 0.5]])
            .utility_fn("U1", |c| {
                let cost = [1.0, 2.0][c[0]];
                let job = if c[2] == 0 { 5.0 } else { 0.0 };
                job - if c[1] == 0 { cost } else { 0.0 }
            })
            .utility_fn("U2", |c| [[3.0, -1.0], [-2.0, 0.0]][c[0]][c[1]])
            .build()
            .unwrap()
    }

    fn edges(m: &MechanisedGraph) -> Vec<String> {
        m.inter_edges()
            .iter()
            .map(|(a, b)| format!("{a}->{b}"))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    #[test]
    fn job_market_relevance_edges() {
        let m = build_mechanised_graph(&job_market()).unwrap();
        assert_eq!(
            edges(&m),
            [
                "THETA_T->PI_D1",
                "THETA_T->PI_D2",
                "THETA_U1->PI_D1",
                "THETA_U2->PI_D2",
                "PI_D1->PI_D2",
                "PI_D2->PI_D1",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect::<Vec<_>>()
        );
    }

    #[test]
    fn job_market_reachability_paths() {
        let g = job_market();
        let paths = reachability_paths(&g, &NodeId::rule("D1"), &NodeId::rule("D2")).unwrap();
        let shown: Vec<(String, Vec<String>)> = paths
            .iter()
            .map(|p| (p.path.to_string(), p.conditioning.clone()))
            .collect();
        assert_eq!(
            shown,
            vec![
                (
                    "PI_D1 -> D1 <- T -> U2".to_string(),
                    vec!["D2".to_string(), "D1".to_string()]
                ),
                ("PI_D1 -> D1".to_string(), vec![]),
            ]
        );
        assert!(!r_relevant(&g, &NodeId::param("U2"), &NodeId::rule("D1")).unwrap());
    }

    #[test]
    fn target_must_be_a_rule_node() {
        let g = job_market();
        assert!(matches!(
            r_relevant(&g, &NodeId::rule("D1"), &NodeId::param("T")),
            Err(Error::NotADecisionRule(_))
        ));
        assert!(matches!(
            r_relevant(&g, &NodeId::param("Q"), &NodeId::rule("D1")),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn parse_node_ids() {
        assert_eq!(NodeId::parse("PI_D1"), NodeId::rule("D1"));
        assert_eq!(NodeId::parse("Θ_T"), NodeId::param("T"));
        assert_eq!(NodeId::parse("T"), NodeId::var("T"));
    }

    #[test]
    fn no_decisions_no_relevance_edges() {
        let g = GameBuilder::new(1)
            .chance("A", &["a"], &[])
            .cpd("A", vec![vec![1.0]])
            .build()
            .unwrap();
        assert!(build_mechanised_graph(&g).unwrap().inter_edges().is_empty());
    }
}
