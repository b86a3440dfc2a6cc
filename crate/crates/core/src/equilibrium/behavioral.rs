use serde::Serialize;

use crate::equilibrium::polytope::Polytope;
use crate::equilibrium::pure::verify_rational_outcome;
use crate::error::{Error, Result};
use crate::model::{expected_utilities, Assignments, CausalGame, DecisionRule, PolicyProfile, TabularCpd};

/// Size limits of [`behavioral_nash_small`].
pub const MAX_AGENTS: usize = 2;
pub const MAX_CONTEXTS: usize = 4;

/// One decision's share of a family of behavioral equilibria: the set of
/// admissible vectors `x`, where `x[c]` is the probability of the first
/// action in context `c`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyBlock {
    pub decision: String,
    pub agent: usize,
    pub actions: Vec<String>,
    pub contexts: Vec<String>,
    pub vertices: Vec<Vec<f64>>,
    #[serde(skip)]
    region: Polytope,
}

/// A convex family of behavioral equilibria; the product of its blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BehavioralFamily {
    pub blocks: Vec<FamilyBlock>,
}

impl BehavioralFamily {
    /// Range of the first-action probability in each context of each block.
    pub fn intervals(&self) -> Vec<Vec<(f64, f64)>> {
        self.blocks
            .iter()
            .map(|b| {
                (0..b.contexts.len())
                    .map(|c| {
                        let vals = b.vertices.iter().map(|v| v[c]);
                        let lo = vals.clone().fold(f64::INFINITY, f64::min);
                        let hi = vals.fold(f64::NEG_INFINITY, f64::max);
                        (lo, hi)
                    })
                    .collect()
            })
            .collect()
    }

    /// Whether every block is a single point.
    pub fn is_point(&self) -> bool {
        self.blocks.iter().all(|b| b.vertices.len() == 1)
    }

    /// Every combination of block vertices, as profiles.
    pub fn extreme_points(&self, game: &CausalGame) -> Vec<PolicyProfile> {
        let sizes: Vec<usize> = self.blocks.iter().map(|b| b.vertices.len()).collect();
        Assignments::new(sizes)
            .map(|pick| {
                let mut p = PolicyProfile::new();
                for (b, &k) in self.blocks.iter().zip(&pick) {
                    p.insert(b.decision.clone(), rule_from(game, &b.decision, &b.vertices[k]));
                }
                p
            })
            .collect()
    }

    /// Whether `profile` lies in the family.
    pub fn contains(&self, profile: &PolicyProfile, tol: f64) -> bool {
        self.blocks.iter().all(|b| {
            profile.get(&b.decision).is_some_and(|r| {
                let x: Vec<f64> = r.rows().map(|row| row[0]).collect();
                b.region.contains(&x, tol)
            })
        })
    }

    fn within(&self, other: &BehavioralFamily) -> bool {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .all(|(a, b)| a.vertices.iter().all(|v| b.region.contains(v, 1e-9)))
    }
}

/// Rule of a binary decision choosing the first action with probability `x[c]`.
pub(crate) fn rule_from(game: &CausalGame, decision: &str, x: &[f64]) -> DecisionRule {
    let rows = x.iter().map(|p| vec![*p, 1.0 - p]).collect();
    DecisionRule::new(
        TabularCpd::new(
            decision,
            2,
            game.parents(decision).to_vec(),
            game.parent_cards(decision),
            rows,
        )
        .expect("shape follows the game"),
    )
}

fn context_labels(game: &CausalGame, decision: &str) -> Vec<String> {
    let parents = game.parents(decision);
    Assignments::new(game.parent_cards(decision))
        .map(|ctx| {
            ctx.iter()
                .zip(parents)
                .map(|(v, p)| format!("{p}={}", game.variable(p).expect("parent").domain.label(*v)))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

struct Block {
    decision: String,
    agent: usize,
    contexts: usize,
}

/// Behavioral equilibria of a small game by support enumeration.
///
/// Supports at most two agents with free decisions, each with one binary
/// decision observed in at most four contexts. For each assignment of
/// supports the equilibrium conditions are linear in the opponent's
/// probabilities, so each support profile yields a product of polytopes,
/// reported by their vertices. Families contained in another are dropped.
pub fn behavioral_nash_small(game: &CausalGame) -> Result<Vec<BehavioralFamily>> {
    let free = game.free_decisions();
    let mut blocks: Vec<Block> = Vec::new();
    for d in &free {
        let v = game.variable(d).expect("free decision");
        let agent = v.agent.expect("decision agent");
        if blocks.iter().any(|b| b.agent == agent) {
            return Err(Error::UnsupportedSize(format!(
                "agent {agent} has more than one free decision"
            )));
        }
        if v.card() != 2 {
            return Err(Error::UnsupportedSize(format!("decision {d} is not binary")));
        }
        let contexts: usize = game.parent_cards(d).iter().product();
        if contexts > MAX_CONTEXTS {
            return Err(Error::UnsupportedSize(format!(
                "decision {d} has {contexts} contexts (limit {MAX_CONTEXTS})"
            )));
        }
        blocks.push(Block {
            decision: d.to_string(),
            agent,
            contexts,
        });
    }
    if blocks.len() > MAX_AGENTS {
        return Err(Error::UnsupportedSize(format!(
            "{} agents with free decisions (limit {MAX_AGENTS})",
            blocks.len()
        )));
    }
    let n = blocks.len();

    let eu = |xs: &[Vec<f64>]| -> Result<Vec<f64>> {
        let mut p = PolicyProfile::new();
        for (b, x) in blocks.iter().zip(xs) {
            p.insert(b.decision.clone(), rule_from(game, &b.decision, x));
        }
        expected_utilities(game, &p)
    };
    let unit = |k: usize, c: Option<usize>| -> Vec<f64> {
        let mut v = vec![0.0; k];
        if let Some(c) = c {
            v[c] = 1.0;
        }
        v
    };

    // grad[i][c] = (alpha, beta): the gain to block i's agent from moving
    // context c to the first action is alpha + beta . x_other.
    let mut grad: Vec<Vec<(f64, Vec<f64>)>> = Vec::new();
    for i in 0..n {
        let other = if n == 2 { Some(1 - i) } else { None };
        let k_other = other.map_or(0, |j| blocks[j].contexts);
        let agent = blocks[i].agent - 1;
        let mut per_ctx = Vec::new();
        for c in 0..blocks[i].contexts {
            let at = |xo: Vec<f64>, own: Option<usize>| -> Result<f64> {
                let mut xs = vec![Vec::new(); n];
                xs[i] = unit(blocks[i].contexts, own);
                if let Some(j) = other {
                    xs[j] = xo;
                }
                Ok(eu(&xs)?[agent])
            };
            let alpha = at(unit(k_other, None), Some(c))? - at(unit(k_other, None), None)?;
            let mut beta = Vec::new();
            for c2 in 0..k_other {
                let g = at(unit(k_other, Some(c2)), Some(c))? - at(unit(k_other, Some(c2)), None)?;
                beta.push(g - alpha);
            }
            per_ctx.push((alpha, beta));
        }
        grad.push(per_ctx);
    }

    // Support code per context: 0 second action only, 1 first only, 2 both.
    let support_sets: Vec<Vec<Vec<usize>>> = blocks
        .iter()
        .map(|b| Assignments::new(vec![3; b.contexts]).collect())
        .collect();
    let mut families: Vec<BehavioralFamily> = Vec::new();
    let combos: Vec<usize> = support_sets.iter().map(Vec::len).collect();
    for pick in Assignments::new(combos) {
        let supports: Vec<&Vec<usize>> = pick.iter().enumerate().map(|(i, &k)| &support_sets[i][k]).collect();
        let mut regions = Vec::new();
        for i in 0..n {
            let k = blocks[i].contexts;
            let mut poly = Polytope::unit_box(k);
            for (c, s) in supports[i].iter().enumerate() {
                match s {
                    0 => poly.equal(unit(k, Some(c)), 0.0),
                    1 => poly.equal(unit(k, Some(c)), 1.0),
                    _ => {}
                }
            }
            // Conditions that make the other block's supports optimal are
            // linear in this block; with one block they are constants.
            let (j, coeff_dim) = if n == 2 { (1 - i, k) } else { (i, k) };
            for (c, s) in supports[j].iter().enumerate() {
                let (alpha, beta) = &grad[j][c];
                let a: Vec<f64> = if n == 2 { beta.clone() } else { vec![0.0; coeff_dim] };
                match s {
                    0 => poly.le(a, -alpha),
                    1 => poly.ge(a, -alpha),
                    _ => poly.equal(a, -alpha),
                }
            }
            regions.push(poly);
        }
        let mut fam_blocks = Vec::new();
        let mut empty = false;
        for (i, poly) in regions.into_iter().enumerate() {
            let vertices = poly.vertices();
            if vertices.is_empty() {
                empty = true;
                break;
            }
            let d = &blocks[i].decision;
            fam_blocks.push(FamilyBlock {
                decision: d.clone(),
                agent: blocks[i].agent,
                actions: game.variable(d).expect("decision").domain.all_labels().to_vec(),
                contexts: context_labels(game, d),
                vertices,
                region: poly,
            });
        }
        if empty {
            continue;
        }
        let fam = BehavioralFamily { blocks: fam_blocks };
        if families.iter().any(|f| fam.within(f)) {
            continue;
        }
        families.retain(|f| !f.within(&fam));
        families.push(fam);
    }
    for f in &families {
        for p in f.extreme_points(game) {
            if !verify_rational_outcome(game, &p, 1e-6)? {
                return Err(Error::NoRationalOutcome(
                    ": support enumeration produced a non-equilibrium vertex".into(),
                ));
            }
        }
    }
    Ok(families)
}
