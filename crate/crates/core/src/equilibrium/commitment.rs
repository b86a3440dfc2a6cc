use serde::Serialize;

use crate::equilibrium::polytope::Polytope;
use crate::equilibrium::pure::{pure_nash, PureSpace};
use crate::error::{Error, Result};
use crate::model::{expected_utilities, Assignments, CausalGame, DecisionRule, PolicyProfile, Rationality, TabularCpd};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitMode {
    /// Solve the piecewise-linear program over the follower response regions.
    Exact,
    /// Sweep the leader's rule on a grid with the given step.
    Grid { step: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Commitment {
    pub decision: String,
    pub rule: DecisionRule,
    pub leader_payoff: f64,
    /// The followers' response, chosen in the leader's favour among ties.
    pub followers: PolicyProfile,
}

/// Leader's rule parametrised by the probabilities of all but the last
/// action in each context.
struct Param<'a> {
    game: &'a CausalGame,
    decision: String,
    contexts: usize,
    card: usize,
}

impl Param<'_> {
    fn dim(&self) -> usize {
        self.contexts * (self.card - 1)
    }

    fn rule(&self, v: &[f64]) -> DecisionRule {
        let k = self.card - 1;
        let rows = (0..self.contexts)
            .map(|c| {
                let head = &v[c * k..(c + 1) * k];
                let mut row = head.to_vec();
                row.push((1.0 - head.iter().sum::<f64>()).max(0.0));
                row
            })
            .collect();
        DecisionRule::new(
            TabularCpd::new(
                self.decision.clone(),
                self.card,
                self.game.parents(&self.decision).to_vec(),
                self.game.parent_cards(&self.decision),
                rows,
            )
            .expect("shape follows the game"),
        )
    }

    fn simplex(&self) -> Polytope {
        let k = self.card - 1;
        let mut p = Polytope::new(self.dim());
        for c in 0..self.contexts {
            let mut sum = vec![0.0; self.dim()];
            for a in 0..k {
                let mut e = vec![0.0; self.dim()];
                e[c * k + a] = 1.0;
                p.ge(e, 0.0);
                sum[c * k + a] = 1.0;
            }
            p.le(sum, 1.0);
        }
        p
    }

    fn unit(&self, i: Option<usize>) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        if let Some(i) = i {
            v[i] = 1.0;
        }
        v
    }
}

fn leader_decision(game: &CausalGame, leader: usize) -> Result<String> {
    if leader == 0 || leader > game.agents() {
        return Err(Error::UnknownAgent(leader));
    }
    match game.free_decisions_of(leader).as_slice() {
        [d] => Ok(d.to_string()),
        [] => Err(Error::Unsupported(format!(
            "agent {leader} has no free decision to commit"
        ))),
        _ => Err(Error::Unsupported(format!(
            "agent {leader} has several free decisions; commitment needs exactly one"
        ))),
    }
}

/// The leader's best rule to commit to when followers best-respond to it,
/// breaking follower ties in the leader's favour.
pub fn optimal_commitment(game: &CausalGame, leader: usize, mode: CommitMode) -> Result<Commitment> {
    let decision = leader_decision(game, leader)?;
    let param = Param {
        game,
        decision: decision.clone(),
        contexts: game.parent_cards(&decision).iter().product(),
        card: game.card(&decision).expect("decision"),
    };
    match mode {
        CommitMode::Exact => exact(game, leader, &param),
        CommitMode::Grid { step } => grid(game, leader, &param, step),
    }
}

/// Game with the leader's rule node fixed.
pub fn committed(game: &CausalGame, decision: &str, rule: DecisionRule) -> CausalGame {
    let mut g = game.clone();
    g.entry_mut(decision).expect("decision").rationality = Rationality::Fixed(rule);
    g
}

fn exact(game: &CausalGame, leader: usize, param: &Param) -> Result<Commitment> {
    let followers_game = committed(game, &param.decision, param.rule(&param.unit(None)));
    let space = PureSpace::new(&followers_game)?;
    let eval = |v: &[f64], f: &PolicyProfile| -> Result<Vec<f64>> {
        expected_utilities(game, &f.clone().with(param.decision.clone(), param.rule(v)))
    };
    // Affine form of an expected-utility difference in the leader's rule.
    let affine = |f: &PolicyProfile, g: Option<&PolicyProfile>, agent: usize| -> Result<(f64, Vec<f64>)> {
        let value = |v: &[f64]| -> Result<f64> {
            let a = eval(v, f)?[agent - 1];
            Ok(match g {
                Some(g) => a - eval(v, g)?[agent - 1],
                None => a,
            })
        };
        let base = value(&param.unit(None))?;
        let mut w = Vec::with_capacity(param.dim());
        for i in 0..param.dim() {
            w.push(value(&param.unit(Some(i)))? - base);
        }
        Ok((base, w))
    };

    let mut best: Option<(f64, Vec<f64>, PolicyProfile)> = None;
    for pick in Assignments::new(space.sizes()) {
        let f = space.profile(&pick);
        let mut region = param.simplex();
        for agent in 1..=game.agents() {
            let mine = space.positions_of(agent);
            if agent == leader || mine.is_empty() {
                continue;
            }
            let sizes: Vec<usize> = mine.iter().map(|&k| space.rules[k].len()).collect();
            for alt in Assignments::new(sizes) {
                let mut dev = pick.clone();
                for (j, &k) in mine.iter().enumerate() {
                    dev[k] = alt[j];
                }
                if dev == pick {
                    continue;
                }
                let (c, w) = affine(&f, Some(&space.profile(&dev)), agent)?;
                region.ge(w, -c);
            }
        }
        let (c, w) = affine(&f, None, leader)?;
        for v in region.vertices() {
            let value = c + w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            if best.as_ref().is_none_or(|(b, _, _)| value > *b + 1e-12) {
                best = Some((value, v, f.clone()));
            }
        }
    }
    let (leader_payoff, v, followers) =
        best.ok_or_else(|| Error::NoRationalOutcome(" for any committed rule".into()))?;
    Ok(Commitment {
        decision: param.decision.clone(),
        rule: param.rule(&v),
        leader_payoff,
        followers,
    })
}

fn grid(game: &CausalGame, leader: usize, param: &Param, step: f64) -> Result<Commitment> {
    if param.dim() > 2 {
        return Err(Error::UnsupportedSize(format!(
            "grid search over {} parameters (limit 2)",
            param.dim()
        )));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Unsupported(format!("grid step {step}")));
    }
    let n = (1.0 / step).round() as usize;
    let simplex = param.simplex();
    let mut best: Option<Commitment> = None;
    for idx in Assignments::new(vec![n + 1; param.dim()]) {
        let v: Vec<f64> = idx.iter().map(|&i| i as f64 / n as f64).collect();
        if !simplex.contains(&v, 1e-12) {
            continue;
        }
        let rule = param.rule(&v);
        let g = committed(game, &param.decision, rule.clone());
        let set = pure_nash(&g)?;
        for (f, pay) in set.outcomes.iter().zip(&set.payoffs) {
            let value = pay[leader - 1];
            if best.as_ref().is_none_or(|b| value > b.leader_payoff + 1e-12) {
                best = Some(Commitment {
                    decision: param.decision.clone(),
                    rule: rule.clone(),
                    leader_payoff: value,
                    followers: f.clone(),
                });
            }
        }
    }
    best.ok_or_else(|| Error::NoRationalOutcome(" on the commitment grid".into()))
}
