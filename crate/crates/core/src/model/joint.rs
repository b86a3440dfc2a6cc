use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CausalGame, PolicyProfile, Rationality};

/// Probabilities of full instantiations; instantiations of probability zero
/// are omitted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointDistribution {
    variables: Vec<String>,
    cards: Vec<usize>,
    table: BTreeMap<Vec<usize>, f64>,
}

impl JointDistribution {
    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    /// Probability of a full instantiation, values in `variables()` order.
    pub fn prob(&self, values: &[usize]) -> f64 {
        self.table.get(values).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.table.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn total(&self) -> f64 {
        self.table.values().sum()
    }

    /// Probability of a partial instantiation given by variable index.
    pub fn marginal(&self, event: &[(usize, usize)]) -> f64 {
        self.table
            .iter()
            .filter(|(k, _)| event.iter().all(|&(i, v)| k[i] == v))
            .map(|(_, p)| p)
            .sum()
    }
}

struct Factor {
    parents: Vec<usize>,
    parent_cards: Vec<usize>,
    card: usize,
    table: Vec<f64>,
}

impl Factor {
    fn row(&self, assignment: &[usize]) -> &[f64] {
        let idx = self
            .parents
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (&p, &c)| acc * c + assignment[p]);
        &self.table[idx * self.card..(idx + 1) * self.card]
    }
}

/// A game with every decision bound to a table, ready for enumeration.
pub(crate) struct Compiled {
    names: Vec<String>,
    cards: Vec<usize>,
    order: Vec<usize>,
    factors: Vec<Factor>,
    is_utility: Vec<bool>,
    reals: Vec<Option<Vec<f64>>>,
    agent: Vec<Option<usize>>,
    agents: usize,
}

impl Compiled {
    pub(crate) fn new(game: &CausalGame, profile: &PolicyProfile) -> Result<Self> {
        let order = game.topological_order().map_err(Error::Cycle)?;
        let mut factors = Vec::with_capacity(game.len());
        for e in game.entries() {
            let name = &e.variable.name;
            let table = if let Some(cpd) = &e.cpd {
                cpd.clone()
            } else if let Rationality::Fixed(rule) = &e.rationality {
                rule.cpd().clone()
            } else if e.variable.is_decision() {
                let rule = profile.get(name).ok_or_else(|| Error::MissingRule(name.clone()))?;
                rule.cpd().reordered(&e.parents).ok_or_else(|| Error::Shape {
                    variable: name.clone(),
                    detail: format!(
                        "rule conditions on [{}], decision observes [{}]",
                        rule.parents().join(", "),
                        e.parents.join(", ")
                    ),
                })?
            } else {
                return Err(Error::Shape {
                    variable: name.clone(),
                    detail: "missing CPD".into(),
                });
            };
            let table = table.reordered(&e.parents).ok_or_else(|| Error::Shape {
                variable: name.clone(),
                detail: "table parents differ from graph parents".into(),
            })?;
            if table.card() != e.variable.card() || table.parent_cards() != game.parent_cards(name) {
                return Err(Error::Shape {
                    variable: name.clone(),
                    detail: "table dimensions differ from the domains".into(),
                });
            }
            factors.push(Factor {
                parents: e
                    .parents
                    .iter()
                    .map(|p| game.index_of(p).ok_or_else(|| Error::UnknownVariable(p.clone())))
                    .collect::<Result<_>>()?,
                parent_cards: table.parent_cards().to_vec(),
                card: table.card(),
                table: table.rows().flatten().copied().collect(),
            });
        }
        Ok(Compiled {
            names: game.names().map(str::to_string).collect(),
            cards: game.entries().iter().map(|e| e.variable.card()).collect(),
            order,
            factors,
            is_utility: game.entries().iter().map(|e| e.variable.is_utility()).collect(),
            reals: game
                .entries()
                .iter()
                .map(|e| e.variable.domain.real_values().map(<[f64]>::to_vec))
                .collect(),
            agent: game.entries().iter().map(|e| e.variable.agent).collect(),
            agents: game.agents(),
        })
    }

    /// Depth-first enumeration over the variables with `branch[v]` set, in
    /// topological order, skipping zero-probability prefixes and values that
    /// contradict `fixed`. Unbranched variables must have no branched
    /// descendants.
    fn walk<F>(&self, branch: &[bool], fixed: &[Option<usize>], f: &mut F)
    where
        F: FnMut(&[usize], f64),
    {
        let order: Vec<usize> = self.order.iter().copied().filter(|&v| branch[v]).collect();
        let mut assignment = vec![0; self.names.len()];
        self.walk_from(&order, 0, 1.0, fixed, &mut assignment, f);
    }

    fn walk_from<F>(
        &self,
        order: &[usize],
        depth: usize,
        weight: f64,
        fixed: &[Option<usize>],
        assignment: &mut Vec<usize>,
        f: &mut F,
    ) where
        F: FnMut(&[usize], f64),
    {
        let Some(&v) = order.get(depth) else {
            f(assignment, weight);
            return;
        };
        let row = self.factors[v].row(assignment).to_vec();
        for (value, p) in row.into_iter().enumerate() {
            if p == 0.0 || fixed[v].is_some_and(|w| w != value) {
                continue;
            }
            assignment[v] = value;
            self.walk_from(order, depth + 1, weight * p, fixed, assignment, f);
        }
    }

    pub(crate) fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub(crate) fn joint(&self) -> JointDistribution {
        let branch = vec![true; self.names.len()];
        let fixed = vec![None; self.names.len()];
        let mut table = BTreeMap::new();
        self.walk(&branch, &fixed, &mut |a, p| {
            *table.entry(a.to_vec()).or_insert(0.0) += p;
        });
        JointDistribution {
            variables: self.names.clone(),
            cards: self.cards.clone(),
            table,
        }
    }

    /// Expected summed utility per agent, indexed from 0.
    pub(crate) fn expected_utilities(&self) -> Vec<f64> {
        let branch: Vec<bool> = self.is_utility.iter().map(|u| !u).collect();
        let fixed = vec![None; self.names.len()];
        let utilities: Vec<usize> = (0..self.names.len()).filter(|&v| self.is_utility[v]).collect();
        let mut totals = vec![0.0; self.agents];
        self.walk(&branch, &fixed, &mut |a, p| {
            for &u in &utilities {
                let reals = self.reals[u].as_ref().expect("utility domains are numeric");
                let eu: f64 = self.factors[u].row(a).iter().zip(reals).map(|(q, x)| q * x).sum();
                if let Some(agent) = self.agent[u] {
                    totals[agent - 1] += p * eu;
                }
            }
        });
        totals
    }

    /// Probability that the listed variables take the listed values.
    pub(crate) fn probability(&self, event: &[(usize, usize)]) -> f64 {
        let mut fixed = vec![None; self.names.len()];
        for &(v, x) in event {
            if fixed[v].is_some_and(|y| y != x) {
                return 0.0;
            }
            fixed[v] = Some(x);
        }
        let branch: Vec<bool> = (0..self.names.len())
            .map(|v| !self.is_utility[v] || fixed[v].is_some())
            .collect();
        let mut total = 0.0;
        self.walk(&branch, &fixed, &mut |_, p| total += p);
        total
    }
}

/// The joint distribution induced by a full profile.
pub fn induced_joint(game: &CausalGame, profile: &PolicyProfile) -> Result<JointDistribution> {
    Ok(Compiled::new(game, profile)?.joint())
}

/// Expected summed utility of `agent` (1-based) under a full profile.
pub fn expected_utility(game: &CausalGame, profile: &PolicyProfile, agent: usize) -> Result<f64> {
    if agent == 0 || agent > game.agents() {
        return Err(Error::UnknownAgent(agent));
    }
    Ok(Compiled::new(game, profile)?.expected_utilities()[agent - 1])
}

/// Expected summed utility of every agent, in agent order.
pub fn expected_utilities(game: &CausalGame, profile: &PolicyProfile) -> Result<Vec<f64>> {
    Ok(Compiled::new(game, profile)?.expected_utilities())
}

/// Probability of a conjunction of `variable = value` assignments.
pub fn event_probability(game: &CausalGame, profile: &PolicyProfile, event: &[(&str, &str)]) -> Result<f64> {
    let compiled = Compiled::new(game, profile)?;
    let resolved = event
        .iter()
        .map(|(var, val)| {
            let i = compiled
                .index_of(var)
                .ok_or_else(|| Error::UnknownVariable(var.to_string()))?;
            Ok((i, game.value_index(var, val)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(compiled.probability(&resolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DecisionRule, GameBuilder};

    fn game() -> CausalGame {
        GameBuilder::new(2)
            .chance("T", &["h", "l"], &[])
            .decision("D1", 1, &["g", "ng"], &["T"])
            .decision("D2", 2, &["j", "nj"], &["D1"])
            .utility("U1", 1, &[0.0, 3.0], &["D2"])
            .utility("U2", 2, &[-1.0, 1.0], &["T", "D2"])
            .cpd("T", vec![vec![0.25, 0.75]])
            .utility_fn("U1", |c| if c[0] == 0 { 3.0 } else { 0.0 })
            .utility_fn("U2", |c| if c[0] == c[1] { 1.0 } else { -1.0 })
            .build()
            .unwrap()
    }

    fn profile() -> PolicyProfile {
        PolicyProfile::new()
            .with("D1", DecisionRule::pure("D1", 2, vec!["T".into()], vec![2], &[0, 1]))
            .with(
                "D2",
                DecisionRule::new(
                    crate::model::TabularCpd::new(
                        "D2",
                        2,
                        vec!["D1".into()],
                        vec![2],
                        vec![vec![0.5, 0.5], vec![0.0, 1.0]],
                    )
                    .unwrap(),
                ),
            )
    }

    #[test]
    fn joint_sums_to_one_and_factorises() {
        let g = game();
        let j = induced_joint(&g, &profile()).unwrap();
        assert!((j.total() - 1.0).abs() < 1e-12);
        // T=h, D1=g, D2=j, U1=3, U2=1
        assert!((j.prob(&[0, 0, 0, 1, 1]) - 0.25 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn utilities_match_the_joint() {
        let g = game();
        let eu = expected_utilities(&g, &profile()).unwrap();
        let j = induced_joint(&g, &profile()).unwrap();
        let mut direct = [0.0; 2];
        for (a, p) in j.iter() {
            direct[0] += p * [0.0, 3.0][a[3]];
            direct[1] += p * [-1.0, 1.0][a[4]];
        }
        assert!((eu[0] - direct[0]).abs() < 1e-12);
        assert!((eu[1] - direct[1]).abs() < 1e-12);
        assert!((eu[0] - 0.375).abs() < 1e-12);
    }

    #[test]
    fn event_probability_prunes_consistently() {
        let g = game();
        let p = event_probability(&g, &profile(), &[("D2", "j")]).unwrap();
        assert!((p - 0.125).abs() < 1e-12);
        let p = event_probability(&g, &profile(), &[("U2", "1"), ("T", "l")]).unwrap();
        assert!((p - 0.75).abs() < 1e-12);
    }

    #[test]
    fn partial_profile_is_rejected() {
        let g = game();
        let mut partial = profile();
        partial.remove("D2");
        let err = induced_joint(&g, &partial).unwrap_err();
        assert_eq!(err.to_string(), "missing decision rule for D2");
    }

    #[test]
    fn unknown_agent() {
        assert!(matches!(
            expected_utility(&game(), &profile(), 3),
            Err(Error::UnknownAgent(3))
        ));
    }
}
