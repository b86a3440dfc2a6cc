use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Assignments, DecisionRule, Domain, TabularCpd, Variable, Violation, EPS_PROB};

/// How a decision's rule is chosen.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationality {
    /// The agent picks a best response.
    BestResponse,
    /// The rule node was set by a hard mechanism intervention.
    Fixed(DecisionRule),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionStatus {
    /// Rule still to be chosen by the agent.
    Free,
    /// The decision variable itself carries a fixed CPD.
    ObjectFixed,
    /// The decision-rule node is fixed to a given rule.
    Committed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariableEntry {
    pub variable: Variable,
    pub parents: Vec<String>,
    /// Present for chance and utility variables, and for decisions that were
    /// fixed at the object level.
    pub cpd: Option<TabularCpd>,
    pub rationality: Rationality,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CausalGame {
    agents: usize,
    entries: Vec<VariableEntry>,
}

impl CausalGame {
    pub fn empty(agents: usize) -> Self {
        CausalGame {
            agents,
            entries: Vec::new(),
        }
    }

    /// Builds a game from raw entries without validating it.
    pub fn from_entries(agents: usize, entries: Vec<VariableEntry>) -> Self {
        CausalGame { agents, entries }
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn entries(&self) -> &[VariableEntry] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut Vec<VariableEntry> {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.variable.name == name)
    }

    pub fn entry(&self, name: &str) -> Option<&VariableEntry> {
        self.entries.iter().find(|e| e.variable.name == name)
    }

    pub(crate) fn entry_mut(&mut self, name: &str) -> Option<&mut VariableEntry> {
        self.entries.iter_mut().find(|e| e.variable.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&VariableEntry> {
        self.entry(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.entry(name).map(|e| &e.variable)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.variable.name.as_str())
    }

    pub fn card(&self, name: &str) -> Option<usize> {
        self.variable(name).map(Variable::card)
    }

    pub fn parents(&self, name: &str) -> &[String] {
        self.entry(name).map(|e| e.parents.as_slice()).unwrap_or(&[])
    }

    pub fn parent_cards(&self, name: &str) -> Vec<usize> {
        self.parents(name).iter().map(|p| self.card(p).unwrap_or(0)).collect()
    }

    pub fn children(&self, name: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.parents.iter().any(|p| p == name))
            .map(|e| e.variable.name.as_str())
            .collect()
    }

    pub fn decisions(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.variable.is_decision())
            .map(|e| e.variable.name.as_str())
            .collect()
    }

    pub fn decision_status(&self, name: &str) -> Option<DecisionStatus> {
        let e = self.entry(name)?;
        if !e.variable.is_decision() {
            return None;
        }
        Some(if e.cpd.is_some() {
            DecisionStatus::ObjectFixed
        } else if matches!(e.rationality, Rationality::Fixed(_)) {
            DecisionStatus::Committed
        } else {
            DecisionStatus::Free
        })
    }

    /// Decisions whose rule is still chosen by best response.
    pub fn free_decisions(&self) -> Vec<&str> {
        self.decisions()
            .into_iter()
            .filter(|d| self.decision_status(d) == Some(DecisionStatus::Free))
            .collect()
    }

    pub fn decisions_of(&self, agent: usize) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.variable.is_decision() && e.variable.agent == Some(agent))
            .map(|e| e.variable.name.as_str())
            .collect()
    }

    pub fn free_decisions_of(&self, agent: usize) -> Vec<&str> {
        self.decisions_of(agent)
            .into_iter()
            .filter(|d| self.decision_status(d) == Some(DecisionStatus::Free))
            .collect()
    }

    pub fn utilities_of(&self, agent: usize) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.variable.is_utility() && e.variable.agent == Some(agent))
            .map(|e| e.variable.name.as_str())
            .collect()
    }

    pub fn descendants(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![name.to_string()];
        while let Some(n) = stack.pop() {
            for c in self.children(&n) {
                if out.insert(c.to_string()) {
                    stack.push(c.to_string());
                }
            }
        }
        out
    }

    /// Indices of the entries in a topological order, or the name of a
    /// variable on a cycle.
    pub fn topological_order(&self) -> std::result::Result<Vec<usize>, String> {
        let n = self.entries.len();
        let mut indegree = vec![0usize; n];
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, e) in self.entries.iter().enumerate() {
            for p in &e.parents {
                if let Some(j) = self.index_of(p) {
                    indegree[i] += 1;
                    kids[j].push(i);
                }
            }
        }
        let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &k in kids[i].iter().rev() {
                indegree[k] -= 1;
                if indegree[k] == 0 {
                    ready.push(k);
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
            Err(self.entries[stuck].variable.name.clone())
        }
    }

    /// Equality up to variable order and parent order, with CPD entries
    /// compared within `eps`.
    pub fn structurally_eq(&self, other: &CausalGame, eps: f64) -> bool {
        if self.agents != other.agents || self.entries.len() != other.entries.len() {
            return false;
        }
        self.entries.iter().all(|a| {
            let Some(b) = other.entry(&a.variable.name) else {
                return false;
            };
            let pa: BTreeSet<_> = a.parents.iter().collect();
            let pb: BTreeSet<_> = b.parents.iter().collect();
            a.variable == b.variable
                && pa == pb
                && match (&a.cpd, &b.cpd) {
                    (None, None) => true,
                    (Some(x), Some(y)) => x.approx_eq(y, eps),
                    _ => false,
                }
                && match (&a.rationality, &b.rationality) {
                    (Rationality::BestResponse, Rationality::BestResponse) => true,
                    (Rationality::Fixed(x), Rationality::Fixed(y)) => x.approx_eq(y, eps),
                    _ => false,
                }
        })
    }

    /// Builds a CPD for `name` over its current parents from rows.
    pub fn make_cpd(&self, name: &str, rows: Vec<Vec<f64>>) -> Result<TabularCpd> {
        let e = self.require(name)?;
        TabularCpd::new(
            name,
            e.variable.card(),
            e.parents.clone(),
            self.parent_cards(name),
            rows,
        )
    }

    /// Looks up a value index by label.
    pub fn value_index(&self, name: &str, label: &str) -> Result<usize> {
        let v = self
            .variable(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        v.domain.index_of(label).ok_or_else(|| Error::UnknownValue {
            variable: name.to_string(),
            value: label.to_string(),
        })
    }
}

/// Prefixes that name mechanism nodes.
pub const RESERVED_PREFIXES: [&str; 4] = ["PI_", "THETA_", "Π_", "Θ_"];

/// Checks every game invariant; an empty report means the game is valid.
pub fn validate_game(game: &CausalGame) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for e in &game.entries {
        let v = &e.variable;
        let name = v.name.as_str();
        if !seen.insert(name) {
            out.push(Violation::new(name, "duplicate variable name"));
        }
        if RESERVED_PREFIXES.iter().any(|p| name.starts_with(p)) || name.is_empty() {
            out.push(Violation::new(
                name,
                "name is empty or uses a reserved mechanism prefix",
            ));
        }
        if v.domain.is_empty() {
            out.push(Violation::new(name, "empty domain"));
        } else if v.domain.has_duplicates() {
            out.push(Violation::new(name, "domain has duplicate values"));
        }
        match (v.kind, v.agent) {
            (crate::model::VarKind::Chance, Some(_)) => {
                out.push(Violation::new(name, "chance variable must not have an agent"))
            }
            (crate::model::VarKind::Chance, None) => {}
            (_, None) => out.push(Violation::new(name, format!("{} variable needs an agent", v.kind))),
            (_, Some(a)) if a == 0 || a > game.agents => {
                out.push(Violation::new(name, format!("agent {a} outside 1..{}", game.agents)))
            }
            _ => {}
        }
        let mut pset = HashSet::new();
        for p in &e.parents {
            if !pset.insert(p) {
                out.push(Violation::new(name, format!("parent `{p}` listed twice")));
            }
            match game.entry(p) {
                None => out.push(Violation::new(name, format!("unknown parent `{p}`"))),
                Some(pe) if pe.variable.is_utility() => {
                    out.push(Violation::new(name, format!("utility variable `{p}` must be a leaf")))
                }
                _ => {}
            }
        }
        match (&e.cpd, v.is_decision()) {
            (None, false) => out.push(Violation::new(name, "missing CPD")),
            (Some(cpd), _) => check_table(game, e, cpd, &mut out),
            (None, true) => {}
        }
        match &e.rationality {
            Rationality::Fixed(rule) if !v.is_decision() => {
                out.push(Violation::new(name, "only decisions carry decision rules"));
                let _ = rule;
            }
            // A rule under an object-level fix is dormant and may be stale.
            Rationality::Fixed(_) if e.cpd.is_some() => {}
            Rationality::Fixed(rule) => check_table(game, e, rule.cpd(), &mut out),
            Rationality::BestResponse => {}
        }
    }
    if let Err(at) = game.topological_order() {
        out.push(Violation::new(at, "graph has a cycle"));
    }
    out
}

fn check_table(game: &CausalGame, e: &VariableEntry, cpd: &TabularCpd, out: &mut Vec<Violation>) {
    let name = e.variable.name.as_str();
    if cpd.variable() != name {
        out.push(Violation::new(name, format!("table is for `{}`", cpd.variable())));
    }
    if cpd.card() != e.variable.card() {
        out.push(Violation::new(
            name,
            format!("table has {} columns, domain has {}", cpd.card(), e.variable.card()),
        ));
    }
    if cpd.parents() != e.parents.as_slice() {
        out.push(Violation::new(
            name,
            format!(
                "table parents [{}] differ from graph parents [{}]",
                cpd.parents().join(", "),
                e.parents.join(", ")
            ),
        ));
    } else if cpd.parent_cards() != game.parent_cards(name).as_slice() {
        out.push(Violation::new(
            name,
            "table parent cardinalities differ from the domains",
        ));
    }
    for row in cpd.bad_rows(EPS_PROB) {
        let sum: f64 = cpd.row(row).iter().sum();
        out.push(Violation::new(
            format!("{name}[row {row}]"),
            format!("row is not a distribution (sum {sum})"),
        ));
    }
}

/// Incremental construction of a game by name.
#[derive(Debug)]
pub struct GameBuilder {
    game: CausalGame,
    errors: Vec<Error>,
}

impl GameBuilder {
    pub fn new(agents: usize) -> Self {
        GameBuilder {
            game: CausalGame::empty(agents),
            errors: Vec::new(),
        }
    }

    fn push(mut self, variable: Variable, parents: &[&str]) -> Self {
        self.game.entries.push(VariableEntry {
            variable,
            parents: parents.iter().map(|p| p.to_string()).collect(),
            cpd: None,
            rationality: Rationality::BestResponse,
        });
        self
    }

    pub fn chance(self, name: &str, values: &[&str], parents: &[&str]) -> Self {
        self.push(Variable::chance(name, Domain::labels(values.iter().copied())), parents)
    }

    pub fn decision(self, name: &str, agent: usize, values: &[&str], parents: &[&str]) -> Self {
        self.push(
            Variable::decision(name, agent, Domain::labels(values.iter().copied())),
            parents,
        )
    }

    pub fn utility(self, name: &str, agent: usize, values: &[f64], parents: &[&str]) -> Self {
        self.push(Variable::utility(name, agent, values), parents)
    }

    /// Sets the CPD of `name` from rows in parent mixed-radix order.
    pub fn cpd(mut self, name: &str, rows: Vec<Vec<f64>>) -> Self {
        match self.game.make_cpd(name, rows) {
            Ok(cpd) => self.game.entry_mut(name).expect("checked").cpd = Some(cpd),
            Err(e) => self.errors.push(e),
        }
        self
    }

    /// Deterministic CPD for a utility (or any numeric) variable given as a
    /// function of the parent value indices.
    pub fn utility_fn(mut self, name: &str, f: impl Fn(&[usize]) -> f64) -> Self {
        let Some(e) = self.game.entry(name) else {
            self.errors.push(Error::UnknownVariable(name.to_string()));
            return self;
        };
        let domain = e.variable.domain.clone();
        let mut rows = Vec::new();
        for ctx in Assignments::new(self.game.parent_cards(name)) {
            let value = f(&ctx);
            let Some(i) = domain
                .real_values()
                .and_then(|r| r.iter().position(|x| (x - value).abs() < 1e-12))
            else {
                self.errors.push(Error::UnknownValue {
                    variable: name.to_string(),
                    value: crate::model::format_real(value),
                });
                return self;
            };
            let mut row = vec![0.0; domain.len()];
            row[i] = 1.0;
            rows.push(row);
        }
        self.cpd(name, rows)
    }

    pub fn build(mut self) -> Result<CausalGame> {
        if !self.errors.is_empty() {
            return Err(self.errors.swap_remove(0));
        }
        let report = validate_game(&self.game);
        if report.is_empty() {
            Ok(self.game)
        } else {
            Err(Error::Invalid(report))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> GameBuilder {
        GameBuilder::new(1)
            .chance("A", &["a0", "a1"], &[])
            .decision("D", 1, &["x", "y"], &["A"])
            .utility("U", 1, &[0.0, 1.0], &["A", "D"])
            .cpd("A", vec![vec![0.5, 0.5]])
            .utility_fn("U", |c| if c[0] == c[1] { 1.0 } else { 0.0 })
    }

    #[test]
    fn valid_game_builds() {
        let g = tiny().build().unwrap();
        assert_eq!(g.children("A"), vec!["D", "U"]);
        assert_eq!(g.free_decisions(), vec!["D"]);
        assert!(g.descendants("D").contains("U"));
    }

    #[test]
    fn bad_row_is_reported() {
        let err = tiny().cpd("A", vec![vec![0.5, 0.4]]).build().unwrap_err();
        let Error::Invalid(v) = err else { panic!() };
        assert_eq!(v.len(), 1);
        assert!(v[0].subject.contains("row 0"));
    }

    #[test]
    fn cycle_is_reported() {
        let g = GameBuilder::new(2)
            .decision("D1", 1, &["a"], &["D2"])
            .decision("D2", 2, &["a"], &["D1"]);
        let Error::Invalid(v) = g.build().unwrap_err() else {
            panic!()
        };
        assert!(v.iter().any(|v| v.message.contains("cycle")));
    }

    #[test]
    fn utility_children_rejected() {
        let g = tiny().chance("C", &["c"], &["U"]).cpd("C", vec![vec![1.0]; 2]);
        let Error::Invalid(v) = g.build().unwrap_err() else {
            panic!()
        };
        assert!(v.iter().any(|v| v.message.contains("leaf")));
    }

    #[test]
    fn structural_equality_ignores_order() {
        let g = tiny().build().unwrap();
        let mut h = g.clone();
        h.entries_mut().reverse();
        assert!(g.structurally_eq(&h, 0.0));
        h.entries_mut()[0].parents.reverse();
        let u = h.entries_mut()[0].cpd.take().unwrap();
        h.entries_mut()[0].cpd = Some(u.reordered(&["D".into(), "A".into()]).unwrap());
        assert!(g.structurally_eq(&h, 0.0));
    }
}
