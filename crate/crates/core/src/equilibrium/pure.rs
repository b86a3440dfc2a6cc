use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{enumerate_pure_rules, expected_utilities, Assignments, CausalGame, DecisionRule, PolicyProfile};

/// Default tolerance for deviation tests.
pub const EPS_EQ: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    PureExhaustive,
    BehavioralSupportEnum,
}

/// Rational outcomes of a game together with their expected utilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RationalOutcomeSet {
    pub mode: SolveMode,
    pub outcomes: Vec<PolicyProfile>,
    /// `payoffs[k][i]` is agent `i + 1`'s expected utility in outcome `k`.
    pub payoffs: Vec<Vec<f64>>,
}

impl RationalOutcomeSet {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// The pure rules of every free decision, in game order.
pub(crate) struct PureSpace {
    pub decisions: Vec<String>,
    pub agents: Vec<usize>,
    pub rules: Vec<Vec<DecisionRule>>,
}

impl PureSpace {
    pub fn new(game: &CausalGame) -> Result<Self> {
        let decisions: Vec<String> = game.free_decisions().into_iter().map(str::to_string).collect();
        let agents = decisions
            .iter()
            .map(|d| game.variable(d).and_then(|v| v.agent).expect("decisions have agents"))
            .collect();
        let rules = decisions
            .iter()
            .map(|d| enumerate_pure_rules(game, d))
            .collect::<Result<_>>()?;
        Ok(PureSpace {
            decisions,
            agents,
            rules,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.rules.iter().map(Vec::len).collect()
    }

    pub fn profile(&self, pick: &[usize]) -> PolicyProfile {
        let mut p = PolicyProfile::new();
        for (k, &r) in pick.iter().enumerate() {
            p.insert(self.decisions[k].clone(), self.rules[k][r].clone());
        }
        p
    }

    /// Positions of `agent`'s decisions in `decisions`.
    pub fn positions_of(&self, agent: usize) -> Vec<usize> {
        (0..self.decisions.len()).filter(|&k| self.agents[k] == agent).collect()
    }
}

fn check_agent(game: &CausalGame, agent: usize) -> Result<()> {
    if agent == 0 || agent > game.agents() {
        return Err(Error::UnknownAgent(agent));
    }
    Ok(())
}

/// All pure policies of `agent` that maximise their expected utility against
/// `others`, in enumeration order. Each is returned as a profile over the
/// agent's free decisions.
pub fn best_responses(game: &CausalGame, agent: usize, others: &PolicyProfile) -> Result<Vec<PolicyProfile>> {
    best_responses_eps(game, agent, others, EPS_EQ)
}

pub fn best_responses_eps(
    game: &CausalGame,
    agent: usize,
    others: &PolicyProfile,
    eps: f64,
) -> Result<Vec<PolicyProfile>> {
    check_agent(game, agent)?;
    let space = PureSpace::new(game)?;
    for (k, d) in space.decisions.iter().enumerate() {
        if space.agents[k] != agent && others.get(d).is_none() {
            return Err(Error::MissingRule(d.clone()));
        }
    }
    let mine = space.positions_of(agent);
    let sizes: Vec<usize> = mine.iter().map(|&k| space.rules[k].len()).collect();
    let mut scored = Vec::new();
    for pick in Assignments::new(sizes) {
        let mut policy = PolicyProfile::new();
        for (j, &k) in mine.iter().enumerate() {
            policy.insert(space.decisions[k].clone(), space.rules[k][pick[j]].clone());
        }
        let eu = expected_utilities(game, &others.merged(&policy))?[agent - 1];
        scored.push((policy, eu));
    }
    let best = scored.iter().map(|(_, u)| *u).fold(f64::NEG_INFINITY, f64::max);
    Ok(scored
        .into_iter()
        .filter(|(_, u)| *u >= best - eps)
        .map(|(p, _)| p)
        .collect())
}

/// Whether no agent can gain more than `eps` by a pure deviation.
pub fn verify_rational_outcome(game: &CausalGame, profile: &PolicyProfile, eps: f64) -> Result<bool> {
    let space = PureSpace::new(game)?;
    let base = expected_utilities(game, profile)?;
    for agent in 1..=game.agents() {
        let mine = space.positions_of(agent);
        if mine.is_empty() {
            continue;
        }
        let sizes: Vec<usize> = mine.iter().map(|&k| space.rules[k].len()).collect();
        for pick in Assignments::new(sizes) {
            let mut deviation = profile.clone();
            for (j, &k) in mine.iter().enumerate() {
                deviation.insert(space.decisions[k].clone(), space.rules[k][pick[j]].clone());
            }
            if expected_utilities(game, &deviation)?[agent - 1] > base[agent - 1] + eps {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Every pure-policy Nash equilibrium, by exhaustive scan over pure profiles.
pub fn pure_nash(game: &CausalGame) -> Result<RationalOutcomeSet> {
    pure_nash_eps(game, EPS_EQ)
}

pub fn pure_nash_eps(game: &CausalGame, eps: f64) -> Result<RationalOutcomeSet> {
    let space = PureSpace::new(game)?;
    let sizes = space.sizes();
    let mut table: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    let mut order = Vec::new();
    for pick in Assignments::new(sizes.clone()) {
        let eu = expected_utilities(game, &space.profile(&pick))?;
        table.insert(pick.clone(), eu);
        order.push(pick);
    }
    let mut outcomes = Vec::new();
    let mut payoffs = Vec::new();
    'profiles: for pick in &order {
        let base = &table[pick];
        for agent in 1..=game.agents() {
            let mine = space.positions_of(agent);
            if mine.is_empty() {
                continue;
            }
            let own: Vec<usize> = mine.iter().map(|&k| sizes[k]).collect();
            for alt in Assignments::new(own) {
                let mut dev = pick.clone();
                for (j, &k) in mine.iter().enumerate() {
                    dev[k] = alt[j];
                }
                if table[&dev][agent - 1] > base[agent - 1] + eps {
                    continue 'profiles;
                }
            }
        }
        outcomes.push(space.profile(pick));
        payoffs.push(base.clone());
    }
    Ok(RationalOutcomeSet {
        mode: SolveMode::PureExhaustive,
        outcomes,
        payoffs,
    })
}

/// A uniformly drawn pure equilibrium; deterministic in `seed`.
pub fn sample_rational_outcome(game: &CausalGame, seed: u64) -> Result<PolicyProfile> {
    let set = pure_nash(game)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw(&set, &mut rng).cloned()
}

pub(crate) fn draw<'a, R: Rng>(set: &'a RationalOutcomeSet, rng: &mut R) -> Result<&'a PolicyProfile> {
    if set.outcomes.is_empty() {
        return Err(Error::NoRationalOutcome(" among pure policies".into()));
    }
    Ok(&set.outcomes[rng.random_range(0..set.outcomes.len())])
}
