//! Causal games: typed variables, tabular CPDs, decision rules, policy
//! profiles and the distribution a profile induces.

mod cpd;
mod game;
mod joint;
mod variable;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

pub use cpd::{DecisionRule, TabularCpd};
pub use game::{validate_game, CausalGame, DecisionStatus, GameBuilder, Rationality, VariableEntry};
pub use joint::{event_probability, expected_utilities, expected_utility, induced_joint, JointDistribution};
pub use variable::{format_real, Domain, VarKind, Variable};

use crate::error::{Error, Result};

/// Default tolerance for probability comparisons.
pub const EPS_PROB: f64 = 1e-9;

/// One failed game invariant, naming the variable (and row) at fault.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl Violation {
    pub(crate) fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Odometer over a mixed-radix space, last position fastest.
#[derive(Clone, Debug)]
pub struct Assignments {
    cards: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Assignments {
    pub fn new(cards: Vec<usize>) -> Self {
        let next = if cards.contains(&0) {
            None
        } else {
            Some(vec![0; cards.len()])
        };
        Assignments { cards, next }
    }
}

impl Iterator for Assignments {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut k = succ.len();
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            succ[k] += 1;
            if succ[k] < self.cards[k] {
                self.next = Some(succ);
                break;
            }
            succ[k] = 0;
        }
        Some(current)
    }
}

/// Decision rules keyed by decision variable; may be partial.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PolicyProfile {
    rules: BTreeMap<String, DecisionRule>,
}

impl PolicyProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, decision: impl Into<String>, rule: DecisionRule) -> Self {
        self.insert(decision, rule);
        self
    }

    pub fn insert(&mut self, decision: impl Into<String>, rule: DecisionRule) {
        self.rules.insert(decision.into(), rule);
    }

    pub fn remove(&mut self, decision: &str) -> Option<DecisionRule> {
        self.rules.remove(decision)
    }

    pub fn get(&self, decision: &str) -> Option<&DecisionRule> {
        self.rules.get(decision)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DecisionRule)> {
        self.rules.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Full for `game` when every decision whose rule is still open has one.
    pub fn is_full(&self, game: &CausalGame) -> bool {
        game.free_decisions().iter().all(|d| self.rules.contains_key(*d))
    }

    /// Entries of `other` override entries of `self`.
    pub fn merged(&self, other: &PolicyProfile) -> PolicyProfile {
        let mut out = self.clone();
        for (k, v) in &other.rules {
            out.rules.insert(k.clone(), v.clone());
        }
        out
    }

    pub fn approx_eq(&self, other: &PolicyProfile, eps: f64) -> bool {
        self.rules.len() == other.rules.len()
            && self
                .rules
                .iter()
                .all(|(k, v)| other.rules.get(k).is_some_and(|w| v.cpd().approx_eq(w.cpd(), eps)))
    }
}

/// All pure rules for `decision`, ordered lexicographically by the action
/// chosen in each context (first context most significant).
pub fn enumerate_pure_rules(game: &CausalGame, decision: &str) -> Result<Vec<DecisionRule>> {
    let entry = game
        .entry(decision)
        .ok_or_else(|| Error::UnknownVariable(decision.to_string()))?;
    if !entry.variable.is_decision() {
        return Err(Error::NotADecision(decision.to_string()));
    }
    let card = entry.variable.card();
    let parent_cards = game.parent_cards(decision);
    let contexts: usize = parent_cards.iter().product();
    Ok(Assignments::new(vec![card; contexts])
        .map(|actions| DecisionRule::pure(decision, card, entry.parents.clone(), parent_cards.clone(), &actions))
        .collect())
}
