//! Mechanism-level consequences of interventions.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{build_mechanised_graph, reachability_paths, Direction, NodeId, Path, ReachabilityPath};
use crate::intervention::primitive::{apply_all, apply_primitive, Primitive, PrimitiveIntervention};
use crate::model::{CausalGame, DecisionStatus};

pub type MechEdge = (NodeId, NodeId);

/// Inter-mechanism edges removed and added by an intervention.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SideEffectReport {
    pub removed: Vec<MechEdge>,
    pub added: Vec<MechEdge>,
    /// Removals predicted from the severed edges alone, before rebuilding.
    /// Only object-level fixes make predictions.
    pub predicted_removed: Vec<MechEdge>,
}

impl SideEffectReport {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }

    /// Whether every predicted removal shows up in the rebuilt graph.
    pub fn prediction_holds(&self) -> bool {
        self.predicted_removed.iter().all(|e| self.removed.contains(e))
    }
}

/// Diff of the inter-mechanism edges before and after applying `p`.
pub fn side_effects(game: &CausalGame, p: &PrimitiveIntervention) -> Result<SideEffectReport> {
    let after = apply_primitive(game, p)?.game;
    let mut report = edge_diff(game, &after)?;
    if let Primitive::FixObject { target, parents, cpd } = &p.primitive {
        report.predicted_removed = severed_removals(game, target, parents, cpd.is_some())?;
    }
    Ok(report)
}

/// Diff of the inter-mechanism edges of two games.
pub fn edge_diff(before: &CausalGame, after: &CausalGame) -> Result<SideEffectReport> {
    let a = build_mechanised_graph(before)?;
    let b = build_mechanised_graph(after)?;
    Ok(SideEffectReport {
        removed: a.inter_edges().difference(b.inter_edges()).cloned().collect(),
        added: b.inter_edges().difference(a.inter_edges()).cloned().collect(),
        predicted_removed: Vec::new(),
    })
}

/// Whether `path` traverses the edge `from -> to` in either reading direction.
pub fn path_uses_edge(path: &Path, from: &str, to: &str) -> bool {
    path.directions.iter().enumerate().any(|(k, d)| {
        let (a, b) = (&path.nodes[k], &path.nodes[k + 1]);
        match d {
            Direction::Forward => a == from && b == to,
            Direction::Backward => a == to && b == from,
        }
    })
}

/// Inter-mechanism edges that a fix of `target` with new parents `parents`
/// must remove: those all of whose reachability paths use a severed edge
/// into `target`. Fixing a decision with a table also severs its rule edge.
pub fn severed_removals(
    game: &CausalGame,
    target: &str,
    parents: &[String],
    with_table: bool,
) -> Result<Vec<MechEdge>> {
    let entry = game.require(target)?;
    let mut severed: Vec<String> = entry.parents.iter().filter(|p| !parents.contains(p)).cloned().collect();
    let listens = matches!(
        game.decision_status(target),
        Some(DecisionStatus::Free | DecisionStatus::Committed)
    );
    if with_table && listens {
        severed.push(NodeId::rule(target).to_string());
    }
    if severed.is_empty() {
        return Ok(Vec::new());
    }
    let mech = build_mechanised_graph(game)?;
    let mut out = Vec::new();
    for (from, to) in mech.inter_edges() {
        let paths = reachability_paths(game, from, to)?;
        if !paths.is_empty()
            && paths
                .iter()
                .all(|r| severed.iter().any(|w| path_uses_edge(&r.path, w, target)))
        {
            out.push((from.clone(), to.clone()));
        }
    }
    Ok(out)
}

/// For each reachability path, the object-level variables it enters through
/// an arrowhead: intervening on any of them cuts that path.
pub fn hit_sets(paths: &[ReachabilityPath], game: &CausalGame) -> Vec<BTreeSet<String>> {
    paths
        .iter()
        .map(|r| {
            r.path
                .heads()
                .into_iter()
                .filter(|n| game.entry(n).is_some())
                .map(str::to_string)
                .collect()
        })
        .collect()
}

/// Smallest set of object-level variables meeting every reachability path
/// from `mech` to `target`. Ties go to the lexicographically smallest set
/// of sorted names.
pub fn minimum_intervention_set(game: &CausalGame, mech: &NodeId, target: &NodeId) -> Result<BTreeSet<String>> {
    let paths = reachability_paths(game, mech, target)?;
    if paths.is_empty() {
        return Err(Error::DependencyAbsent {
            from: mech.to_string(),
            to: target.to_string(),
        });
    }
    let sets = hit_sets(&paths, game);
    if sets.iter().any(BTreeSet::is_empty) {
        return Err(Error::NoHittingSet {
            from: mech.to_string(),
            to: target.to_string(),
        });
    }
    let universe: Vec<String> = sets
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut best: Option<Vec<usize>> = None;
    let mut chosen = Vec::new();
    branch(&universe, &sets, 0, &mut chosen, &mut best);
    Ok(best
        .expect("the whole universe hits every set")
        .into_iter()
        .map(|i| universe[i].clone())
        .collect())
}

/// Branch and bound over include/exclude decisions in name order. Including
/// first means the first minimum found is the lexicographically smallest.
fn branch(
    universe: &[String],
    sets: &[BTreeSet<String>],
    k: usize,
    chosen: &mut Vec<usize>,
    best: &mut Option<Vec<usize>>,
) {
    if best.as_ref().is_some_and(|b| chosen.len() >= b.len()) {
        return;
    }
    let hits_all = sets.iter().all(|s| chosen.iter().any(|&i| s.contains(&universe[i])));
    if hits_all {
        *best = Some(chosen.clone());
        return;
    }
    if k == universe.len() {
        return;
    }
    // A set missed so far that no later element can hit is a dead end.
    let dead = sets
        .iter()
        .any(|s| !chosen.iter().any(|&i| s.contains(&universe[i])) && !universe[k..].iter().any(|u| s.contains(u)));
    if dead {
        return;
    }
    chosen.push(k);
    branch(universe, sets, k + 1, chosen, best);
    chosen.pop();
    branch(universe, sets, k + 1, chosen, best);
}

/// Mechanism pairs whose relevance flips under an intervention.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// Pairs with reachability paths before and none after.
    pub broken: Vec<MechEdge>,
    /// Pairs with no reachability path before and some after.
    pub created: Vec<MechEdge>,
}

impl InvarianceReport {
    pub fn is_invariant(&self) -> bool {
        self.broken.is_empty() && self.created.is_empty()
    }
}

/// Compares the existence of reachability paths for every mechanism and
/// decision-rule pair before and after applying `interventions` in order.
/// Pairs present in only one of the games count as having no paths in the
/// other.
pub fn incentive_report(game: &CausalGame, interventions: &[PrimitiveIntervention]) -> Result<InvarianceReport> {
    let (after, _) = apply_all(game, interventions)?;
    let before_pairs = reachable_pairs(game)?;
    let after_pairs = reachable_pairs(&after)?;
    Ok(InvarianceReport {
        broken: before_pairs.difference(&after_pairs).cloned().collect(),
        created: after_pairs.difference(&before_pairs).cloned().collect(),
    })
}

pub fn incentive_invariant(game: &CausalGame, interventions: &[PrimitiveIntervention]) -> Result<bool> {
    Ok(incentive_report(game, interventions)?.is_invariant())
}

fn reachable_pairs(game: &CausalGame) -> Result<BTreeSet<MechEdge>> {
    let mech = build_mechanised_graph(game)?;
    let mut out = BTreeSet::new();
    for d in game.decisions() {
        let target = NodeId::rule(d);
        for m in mech.mechanism_nodes() {
            if *m != target && !reachability_paths(game, m, &target)?.is_empty() {
                out.insert((m.clone(), target.clone()));
            }
        }
    }
    Ok(out)
}
