//! Random games and the checks shared by the property tests and the
//! acceptance runner. Every check returns `Err(reason)` on a counterexample.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use causal_games::equilibrium::pure_nash;
use causal_games::graph::{d_separated, DiGraph};
use causal_games::intervention::{
    apply_all, apply_primitive, decompose, game_after, invert_all, side_effects, trivial_decomposition, visible_game,
    DecomposeOptions, LabelledIntervention, Primitive, PrimitiveIntervention, VisibilityMap,
};
use causal_games::io::load_scenario;
use causal_games::model::{
    expected_utilities, induced_joint, CausalGame, DecisionRule, GameBuilder, PolicyProfile, TabularCpd,
};
use causal_games::query::{evaluate_query, parse_query, QueryJob, Verdict};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dist(rng: &mut ChaCha8Rng, card: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..card).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn one_hot(rng: &mut ChaCha8Rng, card: usize) -> Vec<f64> {
    let mut row = vec![0.0; card];
    row[rng.random_range(0..card)] = 1.0;
    row
}

const UTILITY_VALUES: [f64; 4] = [0.0, 1.0, 2.0, 3.0];

/// A valid game over at most five variables `V0..`, two agents, at most
/// three parents per variable. `chance_only` gives a plain Bayesian network.
pub fn random_game(seed: u64, chance_only: bool) -> CausalGame {
    let mut rng = rng(seed);
    let n = rng.random_range(2..=5);
    let mut b = GameBuilder::new(2);
    let mut kinds = Vec::new();
    let mut cards = Vec::new();
    for i in 0..n {
        let name = format!("V{i}");
        let candidates: Vec<usize> = (0..i).filter(|&j| kinds[j] != 'u').collect();
        let mut parents: Vec<usize> = candidates.into_iter().filter(|_| rng.random_bool(0.5)).collect();
        parents.truncate(3);
        let pnames: Vec<String> = parents.iter().map(|j| format!("V{j}")).collect();
        let prefs: Vec<&str> = pnames.iter().map(String::as_str).collect();
        let roll: f64 = rng.random();
        let kind = if chance_only || roll < 0.45 {
            'c'
        } else if roll < 0.75 {
            'd'
        } else {
            'u'
        };
        let card = if kind == 'u' {
            UTILITY_VALUES.len()
        } else {
            rng.random_range(2..=3)
        };
        let values: Vec<String> = (0..card).map(|k| format!("x{k}")).collect();
        let vrefs: Vec<&str> = values.iter().map(String::as_str).collect();
        let agent = rng.random_range(1..=2);
        let rows: usize = parents.iter().map(|&j| cards[j]).product();
        b = match kind {
            'c' => {
                let table = (0..rows).map(|_| dist(&mut rng, card)).collect();
                b.chance(&name, &vrefs, &prefs).cpd(&name, table)
            }
            'd' => b.decision(&name, agent, &vrefs, &prefs),
            _ => {
                let table = (0..rows).map(|_| one_hot(&mut rng, card)).collect();
                b.utility(&name, agent, &UTILITY_VALUES, &prefs).cpd(&name, table)
            }
        };
        kinds.push(kind);
        cards.push(card);
    }
    b.build().expect("generated games are valid")
}

/// A random stochastic rule for every free decision.
pub fn random_profile(game: &CausalGame, rng: &mut ChaCha8Rng) -> PolicyProfile {
    let mut p = PolicyProfile::new();
    for d in game.free_decisions() {
        let rows = game.parent_cards(d).iter().product::<usize>();
        let card = game.card(d).unwrap();
        let table = (0..rows).map(|_| dist(rng, card)).collect();
        p.insert(d, DecisionRule::new(game.make_cpd(d, table).unwrap()));
    }
    p
}

/// An object-level fix of a random variable over random non-descendant
/// parents. Decisions keep deciding half the time.
pub fn random_fix(game: &CausalGame, rng: &mut ChaCha8Rng) -> PrimitiveIntervention {
    let names: Vec<String> = game.names().map(String::from).collect();
    let target = names[rng.random_range(0..names.len())].clone();
    let below = game.descendants(&target);
    let mut parents: Vec<String> = names
        .iter()
        .filter(|n| **n != target && !below.contains(*n))
        .filter(|n| !game.variable(n).unwrap().is_utility())
        .filter(|_| rng.random_bool(0.5))
        .cloned()
        .collect();
    parents.truncate(3);
    let pcards: Vec<usize> = parents.iter().map(|p| game.card(p).unwrap()).collect();
    let var = game.variable(&target).unwrap();
    let card = var.card();
    let rows: usize = pcards.iter().product();
    let cpd = if var.is_decision() && rng.random_bool(0.5) {
        None
    } else {
        let table = (0..rows)
            .map(|_| {
                if var.is_utility() {
                    one_hot(rng, card)
                } else {
                    dist(rng, card)
                }
            })
            .collect();
        Some(TabularCpd::new(target.as_str(), card, parents.clone(), pcards, table).unwrap())
    };
    Primitive::FixObject { target, parents, cpd }.into()
}

/// A fresh table for a random chance or utility variable.
pub fn random_param_fix(game: &CausalGame, rng: &mut ChaCha8Rng) -> Option<PrimitiveIntervention> {
    let names: Vec<&str> = game
        .names()
        .filter(|n| !game.variable(n).unwrap().is_decision())
        .collect();
    if names.is_empty() {
        return None;
    }
    let x = names[rng.random_range(0..names.len())];
    let var = game.variable(x).unwrap();
    let rows = game.parent_cards(x).iter().product::<usize>();
    let table = (0..rows)
        .map(|_| {
            if var.is_utility() {
                one_hot(rng, var.card())
            } else {
                dist(rng, var.card())
            }
        })
        .collect();
    Some(PrimitiveIntervention::fix_param(game.make_cpd(x, table).unwrap()))
}

/// Joint as a map from named assignments, so variable order does not matter.
fn keyed_joint(game: &CausalGame, profile: &PolicyProfile) -> BTreeMap<Vec<(String, usize)>, f64> {
    let j = induced_joint(game, profile).unwrap();
    let names = j.variables().to_vec();
    j.iter()
        .map(|(vals, p)| {
            let mut key: Vec<(String, usize)> = names.iter().cloned().zip(vals.iter().copied()).collect();
            key.sort();
            (key, p)
        })
        .collect()
}

/// A fix equals its removal followed by a re-addition, in structure and in
/// the joint induced by random full profiles.
pub fn check_trivial_decomposition(seed: u64) -> Check {
    let game = random_game(seed, false);
    let mut rng = rng(seed ^ 0x7472_6976);
    let fix = random_fix(&game, &mut rng);
    let direct = apply_primitive(&game, &fix).map_err(|e| format!("{fix}: {e}"))?.game;
    let steps = trivial_decomposition(&game, &fix).map_err(|e| format!("split {fix}: {e}"))?;
    let (split, _) = apply_all(&game, &steps).map_err(|e| format!("apply split {fix}: {e}"))?;
    if !direct.structurally_eq(&split, 1e-12) {
        return Err(format!("{fix}: games differ structurally"));
    }
    for _ in 0..3 {
        let profile = random_profile(&direct, &mut rng);
        let (a, b) = (keyed_joint(&direct, &profile), keyed_joint(&split, &profile));
        if a.len() != b.len() {
            return Err(format!("{fix}: joints have different supports"));
        }
        for (k, p) in &a {
            let q = b.get(k).copied().unwrap_or(f64::NAN);
            if q.is_nan() || (p - q).abs() > 1e-12 {
                return Err(format!("{fix}: P{k:?} = {p} directly, {q} split"));
            }
        }
    }
    Ok(())
}

/// Every d-separation claim on a random network holds numerically.
pub fn check_d_separation(seed: u64) -> Check {
    let game = random_game(seed, true);
    let joint = induced_joint(&game, &PolicyProfile::new()).unwrap();
    let names: Vec<String> = joint.variables().to_vec();
    let cards = joint.cards().to_vec();
    let n = names.len();
    let g = DiGraph::of_game(&game);
    let mut rng = rng(seed ^ 0x6473_6570);
    for _ in 0..6 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (x, y) = (order[0], order[1]);
        let z: Vec<usize> = order[2..].iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let zs: Vec<&str> = z.iter().map(|&i| names[i].as_str()).collect();
        let sep = d_separated(&g, &[&names[x]], &[&names[y]], &zs).map_err(|e| e.to_string())?;
        if !sep {
            continue;
        }
        // Independence given z: P(x,y,z) P(z) = P(x,z) P(y,z) for all values.
        let mut pxyz = BTreeMap::<(usize, usize, Vec<usize>), f64>::new();
        let mut pxz = BTreeMap::<(usize, Vec<usize>), f64>::new();
        let mut pyz = BTreeMap::<(usize, Vec<usize>), f64>::new();
        let mut pz = BTreeMap::<Vec<usize>, f64>::new();
        for (vals, p) in joint.iter() {
            let zv: Vec<usize> = z.iter().map(|&i| vals[i]).collect();
            *pxyz.entry((vals[x], vals[y], zv.clone())).or_default() += p;
            *pxz.entry((vals[x], zv.clone())).or_default() += p;
            *pyz.entry((vals[y], zv.clone())).or_default() += p;
            *pz.entry(zv).or_default() += p;
        }
        for (zv, p_z) in &pz {
            for a in 0..cards[x] {
                for b in 0..cards[y] {
                    let lhs = pxyz.get(&(a, b, zv.clone())).copied().unwrap_or(0.0) * p_z;
                    let rhs = pxz.get(&(a, zv.clone())).copied().unwrap_or(0.0)
                        * pyz.get(&(b, zv.clone())).copied().unwrap_or(0.0);
                    if (lhs - rhs).abs() > 1e-7 {
                        return Err(format!(
                            "{} _||_ {} | {zs:?} claimed, gap {}",
                            names[x],
                            names[y],
                            (lhs - rhs).abs()
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Applying random interventions then their inverses restores the game.
pub fn check_round_trip(seed: u64) -> Check {
    let game = random_game(seed, false);
    let mut rng = rng(seed ^ 0x7274);
    let mut current = game.clone();
    let mut records = Vec::new();
    for _ in 0..rng.random_range(1..=4) {
        let p = if rng.random_bool(0.5) {
            random_fix(&current, &mut rng)
        } else {
            match random_param_fix(&current, &mut rng) {
                Some(p) => p,
                None => random_fix(&current, &mut rng),
            }
        };
        let a = apply_primitive(&current, &p).map_err(|e| format!("{p}: {e}"))?;
        current = a.game;
        records.push(a.record);
    }
    let (back, _) =
        apply_all(&current, &invert_all(&records).map_err(|e| e.to_string())?).map_err(|e| format!("undo: {e}"))?;
    if back != game {
        return Err(format!(
            "undoing {} interventions did not restore the game",
            records.len()
        ));
    }
    Ok(())
}

/// `Do(X=a)` then `Do(X=b)` differs from the reverse order when `a != b`.
pub fn check_non_commutative(seed: u64) -> Check {
    let game = random_game(seed, false);
    let mut rng = rng(seed ^ 0x6e63);
    let names: Vec<&str> = game.names().collect();
    let x = names[rng.random_range(0..names.len())];
    let var = game.variable(x).unwrap();
    let (a, b) = (var.domain.label(0).to_string(), var.domain.label(1).to_string());
    let seq = |first: &str, second: &str| -> Result<CausalGame, String> {
        let g = apply_primitive(&game, &PrimitiveIntervention::do_value(&game, x, first).unwrap())
            .map_err(|e| e.to_string())?
            .game;
        let p = PrimitiveIntervention::do_value(&g, x, second).unwrap();
        Ok(apply_primitive(&g, &p).map_err(|e| e.to_string())?.game)
    };
    let (ab, ba) = (seq(&a, &b)?, seq(&b, &a)?);
    if ab.structurally_eq(&ba, 1e-12) {
        return Err(format!("do({x}={a}) and do({x}={b}) commute"));
    }
    Ok(())
}

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios")
}

/// The bundled games with their scenario interventions, plus a job-market
/// set that mixes every kind of fix.
pub fn bundled_interventions() -> Vec<(CausalGame, Vec<LabelledIntervention>)> {
    let mut out = Vec::new();
    for file in ["rewards_alice_sees.scn", "commit_revealed.scn", "effortville_high.scn"] {
        let s = load_scenario(scenario_dir().join(file)).unwrap();
        out.push((s.game, s.interventions));
    }
    let s = load_scenario(scenario_dir().join("job_market_mixed.scn")).unwrap();
    out.push((s.game, s.interventions));
    out
}

/// For random visibility, the game after stages `0..=j` is every `A_j`
/// agent's view.
pub fn check_decompose(seed: u64) -> Check {
    let mut rng = rng(seed);
    let cases = bundled_interventions();
    let (game, items) = &cases[rng.random_range(0..cases.len())];
    let mut vis = VisibilityMap::new();
    for agent in 1..=game.agents() {
        let labels: Vec<String> = items
            .iter()
            .filter(|_| rng.random_bool(0.5))
            .map(|i| i.label.clone())
            .collect();
        vis.set(agent, labels);
    }
    let mut order: Vec<usize> = (1..=game.agents()).collect();
    order.shuffle(&mut rng);
    let options = DecomposeOptions {
        per_agent: rng.random_bool(0.3),
        order: rng.random_bool(0.5).then_some(order),
    };
    let d = decompose(game, items, &vis, &options).map_err(|e| e.to_string())?;
    for (j, stage) in d.stages.iter().enumerate() {
        let after = game_after(game, &d, j).map_err(|e| e.to_string())?;
        for &agent in &stage.agents {
            let view = visible_game(game, items, &vis, agent).map_err(|e| e.to_string())?;
            if !after.structurally_eq(&view, 1e-12) {
                return Err(format!(
                    "stage {j} differs from agent {agent}'s view under {vis:?}, {options:?}"
                ));
            }
        }
    }
    Ok(())
}

/// Whether the pure profile space is small enough to enumerate quickly.
pub fn small_enough(game: &CausalGame) -> bool {
    let mut size = 1f64;
    for d in game.free_decisions() {
        let contexts: usize = game.parent_cards(d).iter().product();
        size *= (game.card(d).unwrap() as f64).powi(contexts as i32);
    }
    size <= 729.0
}

fn sorted_dedup(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    v
}

fn values(v: &Verdict) -> Vec<f64> {
    match v {
        Verdict::Values(vs) => vs.clone(),
        other => panic!("expected a value set, got {other:?}"),
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9)
}

/// Seen by everyone, interventions act before the agents solve; seen by
/// no one, they act on the equilibria of the original game.
pub fn check_pre_post_policy(seed: u64) -> Check {
    let game = random_game(seed, false);
    if !small_enough(&game) {
        return Ok(());
    }
    let mut rng = rng(seed ^ 0x7070);
    let Some(p) = random_param_fix(&game, &mut rng) else {
        return Ok(());
    };
    let items = vec![LabelledIntervention::new("x", p.clone())];
    let query = parse_query("forall ne: E[1]").unwrap();
    let job = |vis: VisibilityMap| QueryJob::new(game.clone(), query.clone()).with_interventions(items.clone(), vis);

    let after = apply_primitive(&game, &p).map_err(|e| e.to_string())?.game;
    let pre = evaluate_query(&job(VisibilityMap::new().with(1, ["x"]).with(2, ["x"])));
    let direct = pure_nash(&after).map_err(|e| e.to_string())?;
    match pre {
        Ok(r) => {
            let want = sorted_dedup(direct.payoffs.iter().map(|u| u[0]).collect());
            if !close(&values(&r.verdict), &want) {
                return Err(format!("pre-policy {:?} vs intervene-then-solve {want:?}", r.verdict));
            }
        }
        Err(e) if direct.is_empty() => {
            let _ = e;
        }
        Err(e) => return Err(format!("pre-policy: {e}")),
    }

    let none: [&str; 0] = [];
    let post = evaluate_query(&job(VisibilityMap::new().with(1, none).with(2, none)));
    let original = pure_nash(&game).map_err(|e| e.to_string())?;
    match post {
        Ok(r) => {
            let mut want = Vec::new();
            for pi in &original.outcomes {
                want.push(expected_utilities(&after, pi).map_err(|e| e.to_string())?[0]);
            }
            let want = sorted_dedup(want);
            if !close(&values(&r.verdict), &want) {
                return Err(format!("post-policy {:?} vs solve-then-intervene {want:?}", r.verdict));
            }
        }
        Err(_) if original.is_empty() => {}
        Err(e) => return Err(format!("post-policy: {e}")),
    }
    Ok(())
}

/// Predicted side effects of an object-level fix all show up.
pub fn check_side_effect_prediction(seed: u64) -> Check {
    let game = random_game(seed, false);
    let mut rng = rng(seed ^ 0x7365);
    let fix = random_fix(&game, &mut rng);
    let r = side_effects(&game, &fix).map_err(|e| format!("{fix}: {e}"))?;
    if !r.prediction_holds() {
        return Err(format!(
            "{fix}: predicted {:?}, removed {:?}",
            r.predicted_removed, r.removed
        ));
    }
    Ok(())
}

/// Sampled queries give the same bits for the same seed.
pub fn check_sampled_stable(seed: u64) -> Check {
    let game = random_game(seed, false);
    if !small_enough(&game) {
        return Ok(());
    }
    let job = QueryJob::new(game, parse_query("sampled: E[1] + E[2]").unwrap()).with_seed(seed);
    let (a, b) = (evaluate_query(&job), evaluate_query(&job));
    match (a, b) {
        (Ok(a), Ok(b)) => match (&a.verdict, &b.verdict) {
            (Verdict::Real(x), Verdict::Real(y)) if x.to_bits() == y.to_bits() && a == b => Ok(()),
            _ => Err(format!("{:?} then {:?}", a.verdict, b.verdict)),
        },
        (Err(a), Err(b)) if a.to_string() == b.to_string() => Ok(()),
        (a, b) => Err(format!("{a:?} then {b:?}")),
    }
}

/// Writing a game and reading it back gives the same game.
pub fn check_text_round_trip(seed: u64) -> Check {
    let game = random_game(seed, false);
    let text = causal_games::io::write_game(&game);
    let back = causal_games::io::parse_game(&text).map_err(|e| format!("{e}\n{text}"))?;
    if back != game {
        return Err(format!("round trip changed the game:\n{text}"));
    }
    Ok(())
}
