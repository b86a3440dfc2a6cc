//! Staged evaluation of interventional queries.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{behavioral_nash_small, draw, pure_nash_eps, RationalOutcomeSet, SolveMode, EPS_EQ};
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::intervention::{
    apply_all, apply_primitive, decompose, game_after, invert, DecomposeOptions, Decomposition, LabelledIntervention,
    Primitive, PrimitiveIntervention, VisibilityMap,
};
use crate::model::{
    event_probability, expected_utilities, CausalGame, DecisionRule, PolicyProfile, Rationality, TabularCpd, EPS_PROB,
};
use crate::query::ast::{Body, Expr, Formula, Quantifier, Query};

/// A query together with the game and the interventions it is asked about.
#[derive(Clone, Debug)]
pub struct QueryJob {
    pub game: CausalGame,
    pub interventions: Vec<LabelledIntervention>,
    pub visibility: VisibilityMap,
    pub options: DecomposeOptions,
    pub query: Query,
    /// Seed for sampled queries; ignored by exhaustive ones.
    pub seed: u64,
}

impl QueryJob {
    pub fn new(game: CausalGame, query: Query) -> Self {
        QueryJob {
            game,
            interventions: Vec::new(),
            visibility: VisibilityMap::new(),
            options: DecomposeOptions::default(),
            query,
            seed: 0,
        }
    }

    pub fn with_interventions(mut self, interventions: Vec<LabelledIntervention>, visibility: VisibilityMap) -> Self {
        self.interventions = interventions;
        self.visibility = visibility;
        self
    }

    pub fn with_options(mut self, options: DecomposeOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bool(bool),
    Real(f64),
    /// Distinct values of a numeric query over all leaves, ascending.
    Values(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafValue {
    Bool(bool),
    Real(f64),
}

/// What happened at one stage on the way to a leaf.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTrace {
    pub stage: usize,
    /// Primitives applied to the running game, as text.
    pub applied: Vec<String>,
    /// Agents choosing at this stage.
    pub agents: Vec<usize>,
    /// Agents still to choose whose rules have not been overridden.
    pub pending: Vec<usize>,
    /// Agents whose decisions or rules have been acted on so far.
    pub overridden: Vec<usize>,
    /// Size of the outcome set the stage's agents chose from.
    pub outcomes: usize,
    /// Index of the drawn or branched outcome; `None` under `mix-ties` or
    /// when nobody chooses.
    pub choice: Option<usize>,
    /// Rules fixed at this stage.
    pub fixed: PolicyProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Leaf {
    pub value: LeafValue,
    /// Every rule the agents chose along the way.
    pub profile: PolicyProfile,
    /// The rule in force for each decision of the final game, which differs
    /// from the chosen one where an intervention acted on it.
    pub played: PolicyProfile,
    pub utilities: Vec<f64>,
    pub stages: Vec<StageTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryResult {
    pub verdict: Verdict,
    pub leaves: Vec<Leaf>,
    pub decomposition: Decomposition,
}

/// Running state of one branch.
#[derive(Clone)]
struct Branch {
    game: CausalGame,
    /// Latest application record per label, for inverse steps.
    records: BTreeMap<String, PrimitiveIntervention>,
    fixed: PolicyProfile,
    overridden: BTreeSet<usize>,
    stages: Vec<StageTrace>,
}

struct Ctx<'a> {
    job: &'a QueryJob,
    decomposition: &'a Decomposition,
    /// Game after the interventions of stages `0..=j`, without any fixes.
    perceived: Vec<CausalGame>,
}

/// Evaluates a query stage by stage.
///
/// At each stage the stage's interventions are applied to the running game,
/// the choosing agents solve the game they perceive (the interventions so
/// far without earlier agents' fixes), and their rules are fixed in the
/// running game. Rules fixed earlier stay fixed unless a later intervention
/// acts on them. The query is evaluated on the final running game.
///
/// Sampled queries draw one outcome per stage from a ChaCha8 stream seeded
/// by `job.seed`. `forall` and `exists` branch over every distinct choice.
pub fn evaluate_query(job: &QueryJob) -> Result<QueryResult> {
    let decomposition = decompose(&job.game, &job.interventions, &job.visibility, &job.options)?;
    let perceived = (0..decomposition.stages.len())
        .map(|j| game_after(&job.game, &decomposition, j))
        .collect::<Result<Vec<_>>>()?;
    let ctx = Ctx {
        job,
        decomposition: &decomposition,
        perceived,
    };
    let start = Branch {
        game: job.game.clone(),
        records: BTreeMap::new(),
        fixed: PolicyProfile::new(),
        overridden: BTreeSet::new(),
        stages: Vec::new(),
    };
    let mut leaves = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    let sampled = job.query.quantifier == Quantifier::Sampled;
    run(&ctx, 0, start, sampled.then_some(&mut rng), &mut leaves)?;

    let q = &job.query;
    let verdict = match (&q.body, q.quantifier) {
        (Body::Formula(_), quantifier) => {
            let truth = leaves.iter().map(|l| l.value == LeafValue::Bool(true));
            Verdict::Bool(match quantifier {
                Quantifier::Exists => truth.clone().any(|t| t),
                Quantifier::Forall | Quantifier::Sampled => truth.clone().all(|t| t),
            })
        }
        (Body::Value(_), Quantifier::Sampled) => match leaves[0].value {
            LeafValue::Real(v) => Verdict::Real(v),
            LeafValue::Bool(_) => unreachable!("numeric body"),
        },
        (Body::Value(_), _) => {
            let mut values: Vec<f64> = leaves
                .iter()
                .filter_map(|l| match l.value {
                    LeafValue::Real(v) => Some(v),
                    LeafValue::Bool(_) => None,
                })
                .collect();
            values.sort_by(f64::total_cmp);
            values.dedup_by(|a, b| (*a - *b).abs() <= q.eps);
            Verdict::Values(values)
        }
    };
    Ok(QueryResult {
        verdict,
        leaves,
        decomposition,
    })
}

fn run(
    ctx: &Ctx,
    j: usize,
    mut branch: Branch,
    mut rng: Option<&mut ChaCha8Rng>,
    leaves: &mut Vec<Leaf>,
) -> Result<()> {
    let stages = &ctx.decomposition.stages;
    if j == stages.len() {
        leaves.push(finish(ctx.job, branch)?);
        return Ok(());
    }
    let stage = &stages[j];
    let mut applied = Vec::new();
    for step in &stage.steps {
        let primitive = if step.inverse {
            let record = branch
                .records
                .get(&step.label)
                .ok_or_else(|| Error::NotApplicable(format!("`{}` undone before it was applied", step.label)))?;
            invert(record)?
        } else {
            step.primitive.unjournaled()
        };
        if let Some(agent) = acted_on(&branch.game, &primitive.primitive) {
            branch.overridden.insert(agent);
        }
        let result = apply_primitive(&branch.game, &primitive)?;
        applied.push(result.record.to_string());
        branch.game = result.game;
        if step.inverse {
            branch.records.remove(&step.label);
        } else {
            branch.records.insert(step.label.clone(), result.record);
        }
    }

    let pending: Vec<usize> = stages[j..]
        .iter()
        .flat_map(|s| s.agents.iter().copied())
        .filter(|a| !branch.overridden.contains(a))
        .collect();
    let trace =
        |outcomes: usize, choice: Option<usize>, fixed: PolicyProfile, overridden: &BTreeSet<usize>| StageTrace {
            stage: j,
            applied: applied.clone(),
            agents: stage.agents.clone(),
            pending: pending.clone(),
            overridden: overridden.iter().copied().collect(),
            outcomes,
            choice,
            fixed,
        };

    let perceived = &ctx.perceived[j];
    let decisions: Vec<String> = stage
        .agents
        .iter()
        .flat_map(|&a| perceived.free_decisions_of(a))
        .map(str::to_string)
        .collect();
    if decisions.is_empty() {
        let t = trace(0, None, PolicyProfile::new(), &branch.overridden);
        branch.stages.push(t);
        return run(ctx, j + 1, branch, rng, leaves);
    }

    let q = &ctx.job.query;
    let outcomes = rational_outcomes(perceived, q.behavioral)?;
    if outcomes.is_empty() {
        return Err(Error::NoRationalOutcome(format!(" at stage {j}")));
    }
    let restrict = |p: &PolicyProfile| -> PolicyProfile {
        let mut out = PolicyProfile::new();
        for d in &decisions {
            out.insert(d.clone(), p.get(d).expect("outcomes are full").clone());
        }
        out
    };
    let mut choices: Vec<PolicyProfile> = Vec::new();
    for o in &outcomes.outcomes {
        let r = restrict(o);
        if !choices.iter().any(|c| c.approx_eq(&r, EPS_PROB)) {
            choices.push(r);
        }
    }

    let picks: Vec<(Option<usize>, PolicyProfile)> = if q.mix_ties {
        vec![(None, mix_ties(&decisions, &choices))]
    } else if let Some(rng) = rng.as_deref_mut() {
        let drawn = draw(&outcomes, rng)?;
        let k = outcomes
            .outcomes
            .iter()
            .position(|o| std::ptr::eq(o, drawn))
            .expect("drawn from the set");
        vec![(Some(k), restrict(drawn))]
    } else {
        choices.into_iter().enumerate().map(|(k, c)| (Some(k), c)).collect()
    };

    let n = outcomes.len();
    let last = picks.len() - 1;
    for (k, (choice, fixed)) in picks.into_iter().enumerate() {
        let mut next = if k == last {
            std::mem::replace(&mut branch, placeholder())
        } else {
            branch.clone()
        };
        for (d, rule) in fixed.iter() {
            next.game = apply_primitive(&next.game, &PrimitiveIntervention::commit(rule.clone()))?.game;
            next.fixed.insert(d, rule.clone());
        }
        let t = trace(n, choice, fixed, &next.overridden);
        next.stages.push(t);
        run(ctx, j + 1, next, rng.as_deref_mut(), leaves)?;
    }
    Ok(())
}

fn placeholder() -> Branch {
    Branch {
        game: CausalGame::empty(0),
        records: BTreeMap::new(),
        fixed: PolicyProfile::new(),
        overridden: BTreeSet::new(),
        stages: Vec::new(),
    }
}

/// Uniform mixture, per decision, over the distinct rules it takes across
/// `choices`.
fn mix_ties(decisions: &[String], choices: &[PolicyProfile]) -> PolicyProfile {
    let mut out = PolicyProfile::new();
    for d in decisions {
        let mut rules: Vec<&TabularCpd> = Vec::new();
        for c in choices {
            let r = c.get(d).expect("restricted to decisions").cpd();
            if !rules.iter().any(|x| x.approx_eq(r, EPS_PROB)) {
                rules.push(r);
            }
        }
        let w = vec![1.0 / rules.len() as f64; rules.len()];
        let mixed = TabularCpd::mixture(&rules, &w).expect("same decision, same shape");
        out.insert(d.clone(), DecisionRule::new(mixed));
    }
    out
}

/// The agent whose decision or decision rule `p` acts on, if any.
fn acted_on(game: &CausalGame, p: &Primitive) -> Option<usize> {
    let name = match p {
        Primitive::FixMechanism { target, .. } => match target {
            NodeId::Rule(d) => d.as_str(),
            _ => return None,
        },
        Primitive::AddVariable { variable, .. } => {
            return variable.is_decision().then_some(variable.agent).flatten();
        }
        other => other.variable(),
    };
    game.variable(name).filter(|v| v.is_decision()).and_then(|v| v.agent)
}

/// Pure equilibria, plus the extreme points of behavioral families when
/// `behavioral` is set.
pub fn rational_outcomes(game: &CausalGame, behavioral: bool) -> Result<RationalOutcomeSet> {
    let mut set = pure_nash_eps(game, EPS_EQ)?;
    if behavioral {
        set.mode = SolveMode::BehavioralSupportEnum;
        for family in behavioral_nash_small(game)? {
            for p in family.extreme_points(game) {
                if !set.outcomes.iter().any(|o| o.approx_eq(&p, EPS_PROB)) {
                    set.payoffs.push(expected_utilities(game, &p)?);
                    set.outcomes.push(p);
                }
            }
        }
    }
    Ok(set)
}

fn finish(job: &QueryJob, branch: Branch) -> Result<Leaf> {
    let game = &branch.game;
    if let Some(d) = game.free_decisions().first() {
        return Err(Error::MissingRule(format!(
            "{d}: no agent chose a rule for it in any stage"
        )));
    }
    check_references(game, &job.query)?;
    let none = PolicyProfile::new();
    let utilities = expected_utilities(game, &none)?;
    let q = &job.query;
    let value = match &q.body {
        Body::Formula(f) => LeafValue::Bool(truth(game, &utilities, f, q.eps)?),
        Body::Value(e) => LeafValue::Real(value(game, &utilities, e)?),
    };
    let mut played = PolicyProfile::new();
    for e in game.entries().iter().filter(|e| e.variable.is_decision()) {
        let rule = match (&e.cpd, &e.rationality) {
            (Some(cpd), _) => DecisionRule::new(cpd.clone()),
            (None, Rationality::Fixed(r)) => r.clone(),
            (None, Rationality::BestResponse) => unreachable!("free decisions were rejected above"),
        };
        played.insert(e.variable.name.clone(), rule);
    }
    Ok(Leaf {
        value,
        profile: branch.fixed,
        played,
        utilities,
        stages: branch.stages,
    })
}

/// Rejects agents, variables and values the game does not have.
pub fn check_references(game: &CausalGame, query: &Query) -> Result<()> {
    for e in query.body.exprs() {
        for a in e.agents() {
            if a > game.agents() {
                return Err(Error::Query(format!("agent {a} does not exist")));
            }
        }
        for (var, val) in e.assignments() {
            if game.entry(var).is_none() {
                return Err(Error::Query(format!(
                    "variable `{var}` is not in the game after the interventions"
                )));
            }
            game.value_index(var, val)
                .map_err(|_| Error::Query(format!("`{val}` is not a value of `{var}`")))?;
        }
    }
    Ok(())
}

fn value(game: &CausalGame, utilities: &[f64], e: &Expr) -> Result<f64> {
    Ok(match e {
        Expr::Const(v) => *v,
        Expr::Prob(ev) => {
            let event: Vec<(&str, &str)> = ev.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            event_probability(game, &PolicyProfile::new(), &event)?
        }
        Expr::Utility(i) => *utilities
            .get(i - 1)
            .ok_or_else(|| Error::Query(format!("agent {i} does not exist")))?,
        Expr::Total => utilities.iter().sum(),
        Expr::Neg(a) => -value(game, utilities, a)?,
        Expr::Add(a, b) => value(game, utilities, a)? + value(game, utilities, b)?,
        Expr::Sub(a, b) => value(game, utilities, a)? - value(game, utilities, b)?,
        Expr::Mul(a, b) => value(game, utilities, a)? * value(game, utilities, b)?,
        Expr::Div(a, b) => value(game, utilities, a)? / value(game, utilities, b)?,
    })
}

fn truth(game: &CausalGame, utilities: &[f64], f: &Formula, eps: f64) -> Result<bool> {
    Ok(match f {
        Formula::Atom { lhs, cmp, rhs, within } => {
            let a = value(game, utilities, lhs)?;
            let b = value(game, utilities, rhs)?;
            cmp.holds(a, b, within.unwrap_or(eps))
        }
        Formula::Not(a) => !truth(game, utilities, a, eps)?,
        Formula::And(a, b) => truth(game, utilities, a, eps)? && truth(game, utilities, b, eps)?,
        Formula::Or(a, b) => truth(game, utilities, a, eps)? || truth(game, utilities, b, eps)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityClass {
    /// Chooses after every intervention has been applied.
    PrePolicy,
    /// Chooses before any intervention.
    PostPolicy,
    /// Anything else, including seeing an intervention that is later undone.
    Interleaved,
}

/// How each agent's choice sits relative to the interventions: by the set of
/// steps (forward or undo) applied up to and including the agent's stage.
/// With no interventions every agent is pre-policy.
pub fn classify_visibility(job: &QueryJob) -> Result<BTreeMap<usize, VisibilityClass>> {
    let d = decompose(&job.game, &job.interventions, &job.visibility, &job.options)?;
    let all: BTreeSet<(String, bool)> = job.interventions.iter().map(|i| (i.label.clone(), false)).collect();
    let mut out = BTreeMap::new();
    for agent in 1..=job.game.agents() {
        let j = d.stage_of(agent).expect("every agent has a stage");
        let seen: BTreeSet<(String, bool)> = d.stages[..=j]
            .iter()
            .flat_map(|s| s.steps.iter().map(|st| (st.label.clone(), st.inverse)))
            .collect();
        let class = if seen == all {
            VisibilityClass::PrePolicy
        } else if seen.is_empty() {
            VisibilityClass::PostPolicy
        } else {
            VisibilityClass::Interleaved
        };
        out.insert(agent, class);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecDirection {
    /// The event must become at least as likely in every outcome.
    Increase,
    /// The event must become at most as likely in every outcome.
    Decrease,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpecCheck {
    /// Range of the event probability over the original game's outcomes.
    pub before: (f64, f64),
    /// Range over the intervened game's outcomes.
    pub after: (f64, f64),
    pub holds: bool,
}

/// Whether the interventions, applied before anyone chooses, move the
/// probability of `event` in `direction` whatever outcome is reached: for
/// an increase, the least likely outcome after must be at least as likely as
/// the most likely outcome before. With `behavioral` the outcome sets also
/// include the extreme points of the behavioral equilibrium families.
pub fn check_spec_env(
    game: &CausalGame,
    interventions: &[PrimitiveIntervention],
    event: &[(&str, &str)],
    direction: SpecDirection,
    behavioral: bool,
) -> Result<SpecCheck> {
    let (after_game, _) = apply_all(game, interventions)?;
    let before = probability_range(game, event, behavioral)?;
    let after = probability_range(&after_game, event, behavioral)?;
    let holds = match direction {
        SpecDirection::Increase => after.0 >= before.1 - EPS_PROB,
        SpecDirection::Decrease => after.1 <= before.0 + EPS_PROB,
    };
    Ok(SpecCheck { before, after, holds })
}

fn probability_range(game: &CausalGame, event: &[(&str, &str)], behavioral: bool) -> Result<(f64, f64)> {
    let set = rational_outcomes(game, behavioral)?;
    if set.is_empty() {
        return Err(Error::NoRationalOutcome(String::new()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in &set.outcomes {
        let v = event_probability(game, p, event)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}
