//! Interventions expressed through the primitives: adding and removing an
//! edge, and unfixing.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::intervention::primitive::{invert, Primitive, PrimitiveIntervention};
use crate::model::{induced_joint, CausalGame, DecisionRule, PolicyProfile, TabularCpd, EPS_PROB};

/// `Add(from -> to)` as a fix of `to`. A table is extended by duplicating its
/// rows, so the joint is unchanged until `to` is re-parameterised; a
/// decision just gains an observation.
pub fn add_edge(game: &CausalGame, from: &str, to: &str) -> Result<PrimitiveIntervention> {
    let source = game.require(from)?;
    let entry = game.require(to)?;
    if from == to {
        return Err(Error::Cycle(to.to_string()));
    }
    if entry.parents.iter().any(|p| p == from) {
        return Err(Error::NotApplicable(format!("edge {from} -> {to} already exists")));
    }
    if source.variable.is_utility() {
        return Err(Error::NotApplicable(format!(
            "utility variable `{from}` must stay a leaf"
        )));
    }
    if game.descendants(to).contains(from) {
        return Err(Error::Cycle(to.to_string()));
    }
    let mut parents = entry.parents.clone();
    parents.push(from.to_string());
    let card = source.variable.card();
    Ok(Primitive::FixObject {
        target: to.to_string(),
        parents,
        cpd: entry.cpd.as_ref().map(|c| c.with_parent_appended(from, card)),
    }
    .into())
}

/// `Del(from -> to)` as a fix of `to`. A table that depends on `from` has it
/// mixed out: with `profile`, under `P(from | remaining parents)` from the
/// induced joint; without, under the marginal of `from`, which needs no
/// free decision upstream of `from`. A decision just loses the observation.
pub fn remove_edge(
    game: &CausalGame,
    from: &str,
    to: &str,
    profile: Option<&PolicyProfile>,
) -> Result<PrimitiveIntervention> {
    game.require(from)?;
    let entry = game.require(to)?;
    if !entry.parents.iter().any(|p| p == from) {
        return Err(Error::NotApplicable(format!("edge {from} -> {to} does not exist")));
    }
    let parents: Vec<String> = entry.parents.iter().filter(|p| *p != from).cloned().collect();
    let cpd = match &entry.cpd {
        None => None,
        Some(c) => Some(match c.drop_parent(from, EPS_PROB) {
            Some(t) => t,
            None => mix_out(game, from, to, c, profile)?,
        }),
    };
    Ok(Primitive::FixObject {
        target: to.to_string(),
        parents,
        cpd,
    }
    .into())
}

/// The inverse of an applied fix: restores the previous CPD, parents or rule.
pub fn unfix(applied: &PrimitiveIntervention) -> Result<PrimitiveIntervention> {
    invert(applied)
}

fn ancestors(game: &CausalGame, name: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![name.to_string()];
    while let Some(n) = stack.pop() {
        for p in game.parents(&n) {
            if out.insert(p.clone()) {
                stack.push(p.clone());
            }
        }
    }
    out
}

fn mix_out(
    game: &CausalGame,
    from: &str,
    to: &str,
    cpd: &TabularCpd,
    profile: Option<&PolicyProfile>,
) -> Result<TabularCpd> {
    let conditional = profile.is_some();
    let owned;
    let profile = match profile {
        Some(p) => p,
        None => {
            let mut upstream = ancestors(game, from);
            upstream.insert(from.to_string());
            if let Some(d) = game.free_decisions().into_iter().find(|d| upstream.contains(*d)) {
                return Err(Error::NeedsReplacement {
                    removed: from.to_string(),
                    child: to.to_string(),
                    reason: format!("its distribution depends on the rule of `{d}`; pass a profile"),
                });
            }
            // Rules off the ancestry of `from` cannot change its marginal.
            let mut p = PolicyProfile::new();
            for d in game.free_decisions() {
                let card = game.card(d).expect("decision");
                p.insert(
                    d,
                    DecisionRule::new(TabularCpd::uniform(
                        d,
                        card,
                        game.parents(d).to_vec(),
                        game.parent_cards(d),
                    )),
                );
            }
            owned = p;
            &owned
        }
    };
    let joint = induced_joint(game, profile)?;
    let vars = joint.variables();
    let at = |n: &str| vars.iter().position(|v| v == n).expect("joint covers the game");
    let x = at(from);
    let card = game.card(from).expect("present");
    let marginal: Vec<f64> = (0..card).map(|v| joint.marginal(&[(x, v)])).collect();
    let rest: Vec<usize> = cpd.parents().iter().filter(|p| *p != from).map(|p| at(p)).collect();
    cpd.marginalize_parent(from, |ctx| {
        if !conditional {
            return Ok(marginal.clone());
        }
        let event: Vec<(usize, usize)> = rest.iter().copied().zip(ctx.iter().copied()).collect();
        let z = joint.marginal(&event);
        if z <= 0.0 {
            return Ok(marginal.clone());
        }
        Ok((0..card)
            .map(|v| {
                let mut e = event.clone();
                e.push((x, v));
                joint.marginal(&e) / z
            })
            .collect())
    })
}
