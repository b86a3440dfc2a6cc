//! Splitting a set of labelled interventions into stages so that each agent
//! chooses their policy in exactly the game they can see.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::intervention::primitive::{apply_primitive, invert, PrimitiveIntervention};
use crate::model::CausalGame;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelledIntervention {
    pub label: String,
    pub intervention: PrimitiveIntervention,
}

impl LabelledIntervention {
    pub fn new(label: impl Into<String>, intervention: impl Into<PrimitiveIntervention>) -> Self {
        LabelledIntervention {
            label: label.into(),
            intervention: intervention.into(),
        }
    }
}

/// Labels visible to each agent. Agents not listed see every intervention.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VisibilityMap {
    visible: BTreeMap<usize, BTreeSet<String>>,
}

impl VisibilityMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with<I, S>(mut self, agent: usize, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.set(agent, labels);
        self
    }

    pub fn set<I, S>(&mut self, agent: usize, labels: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.visible.insert(agent, labels.into_iter().map(Into::into).collect());
    }

    /// The labels `agent` sees, in intervention order.
    pub fn visible_to(&self, agent: usize, interventions: &[LabelledIntervention]) -> Vec<String> {
        interventions
            .iter()
            .filter(|i| self.visible.get(&agent).is_none_or(|s| s.contains(&i.label)))
            .map(|i| i.label.clone())
            .collect()
    }

    /// Rejects unknown agents, unknown labels and duplicate labels.
    pub fn check(&self, agents: usize, interventions: &[LabelledIntervention]) -> Result<()> {
        let mut labels = BTreeSet::new();
        for i in interventions {
            if !labels.insert(i.label.as_str()) {
                return Err(Error::NotApplicable(format!(
                    "intervention label `{}` used twice",
                    i.label
                )));
            }
        }
        for (agent, set) in &self.visible {
            if *agent == 0 || *agent > agents {
                return Err(Error::UnknownAgent(*agent));
            }
            if let Some(l) = set.iter().find(|l| !labels.contains(l.as_str())) {
                return Err(Error::NotApplicable(format!(
                    "agent {agent} is shown unknown intervention `{l}`"
                )));
            }
        }
        Ok(())
    }
}

/// One application inside a stage: either a labelled intervention or the
/// inverse of an earlier application of it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub label: String,
    pub inverse: bool,
    /// The concrete primitive, as computed on the interventions-only timeline.
    pub primitive: PrimitiveIntervention,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stage {
    pub steps: Vec<Step>,
    /// Agents who choose their policy right after this stage.
    pub agents: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    pub stages: Vec<Stage>,
}

impl Decomposition {
    /// Stage index at which `agent` chooses.
    pub fn stage_of(&self, agent: usize) -> Option<usize> {
        self.stages.iter().position(|s| s.agents.contains(&agent))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecomposeOptions {
    /// One stage per agent with a full undo of the previous agent's view, as
    /// in the textbook construction, instead of merged, minimal stages.
    pub per_agent: bool,
    /// Order in which agents' views are visited. Defaults to increasing
    /// number of visible interventions, then agent index.
    pub order: Option<Vec<usize>>,
}

/// The game `agent` believes they are playing: the commonly visible
/// interventions, then the agent's other visible ones, in list order.
pub fn visible_game(
    game: &CausalGame,
    interventions: &[LabelledIntervention],
    visibility: &VisibilityMap,
    agent: usize,
) -> Result<CausalGame> {
    let (common, _) = split(game.agents(), interventions, visibility);
    let own: Vec<String> = visibility.visible_to(agent, interventions);
    let mut g = game.clone();
    for label in common.iter().chain(own.iter().filter(|l| !common.contains(l))) {
        let i = interventions.iter().find(|i| &i.label == label).expect("label");
        g = apply_primitive(&g, &i.intervention)?.game;
    }
    Ok(g)
}

/// Labels seen by every agent, and each agent's remaining labels.
fn split(
    agents: usize,
    interventions: &[LabelledIntervention],
    visibility: &VisibilityMap,
) -> (Vec<String>, BTreeMap<usize, Vec<String>>) {
    let views: BTreeMap<usize, Vec<String>> = (1..=agents)
        .map(|a| (a, visibility.visible_to(a, interventions)))
        .collect();
    let common: Vec<String> = interventions
        .iter()
        .map(|i| i.label.clone())
        .filter(|l| views.values().all(|v| v.contains(l)))
        .collect();
    let rest = views
        .into_iter()
        .map(|(a, v)| (a, v.into_iter().filter(|l| !common.contains(l)).collect()))
        .collect();
    (common, rest)
}

/// Builds stages `P_0..P_m` with agent groups `A_0..A_m` such that the game
/// after `P_0..P_j` is the visible game of every agent in `A_j`. Interventions
/// visible to no agent form a last stage with no agents.
pub fn decompose(
    game: &CausalGame,
    interventions: &[LabelledIntervention],
    visibility: &VisibilityMap,
    options: &DecomposeOptions,
) -> Result<Decomposition> {
    let agents = game.agents();
    visibility.check(agents, interventions)?;
    let (common, rest) = split(agents, interventions, visibility);
    let order: Vec<usize> = match &options.order {
        Some(o) => {
            let mut sorted = o.clone();
            sorted.sort_unstable();
            if sorted != (1..=agents).collect::<Vec<_>>() {
                return Err(Error::NotApplicable(format!(
                    "agent order must list agents 1..{agents} once each"
                )));
            }
            o.clone()
        }
        None => {
            let mut o: Vec<usize> = (1..=agents).collect();
            o.sort_by_key(|a| (rest[a].len(), *a));
            o
        }
    };
    let find = |label: &str| interventions.iter().find(|i| i.label == label).expect("label");

    let mut running = game.clone();
    let mut first = Vec::new();
    for label in &common {
        let i = find(label);
        running = apply_primitive(&running, &i.intervention)?.game;
        first.push(Step {
            label: label.clone(),
            inverse: false,
            primitive: i.intervention.unjournaled(),
        });
    }
    let mut stages = vec![Stage {
        steps: first,
        agents: Vec::new(),
    }];
    // Applied non-common interventions with their records, oldest first.
    let mut stack: Vec<(String, PrimitiveIntervention)> = Vec::new();

    let mut groups: Vec<(Vec<String>, Vec<usize>)> = Vec::new();
    for a in order {
        let view = rest[&a].clone();
        match groups.iter_mut().find(|(v, _)| !options.per_agent && *v == view) {
            Some((_, members)) => members.push(a),
            None => groups.push((view, vec![a])),
        }
    }
    for (target, members) in groups {
        let keep = if options.per_agent {
            0
        } else {
            stack.iter().zip(&target).take_while(|((l, _), t)| l == *t).count()
        };
        if !options.per_agent && keep == stack.len() && keep == target.len() {
            stages.last_mut().expect("stage 0").agents.extend(members);
            continue;
        }
        let mut steps = Vec::new();
        while stack.len() > keep {
            let (label, record) = stack.pop().expect("non-empty");
            let inverse = invert(&record)?;
            running = apply_primitive(&running, &inverse)?.game;
            steps.push(Step {
                label,
                inverse: true,
                primitive: inverse,
            });
        }
        for label in &target[keep..] {
            let i = find(label);
            let applied = apply_primitive(&running, &i.intervention)?;
            running = applied.game;
            stack.push((label.clone(), applied.record));
            steps.push(Step {
                label: label.clone(),
                inverse: false,
                primitive: i.intervention.unjournaled(),
            });
        }
        stages.push(Stage { steps, agents: members });
    }
    // Interventions nobody sees land after every policy is chosen.
    let seen: BTreeSet<&String> = rest.values().flatten().chain(&common).collect();
    let hidden: Vec<&LabelledIntervention> = interventions.iter().filter(|i| !seen.contains(&i.label)).collect();
    if !hidden.is_empty() {
        stages.push(Stage {
            steps: hidden
                .into_iter()
                .map(|i| Step {
                    label: i.label.clone(),
                    inverse: false,
                    primitive: i.intervention.unjournaled(),
                })
                .collect(),
            agents: Vec::new(),
        });
    }
    if !options.per_agent && stages.len() > 1 && stages[0].steps.is_empty() && stages[0].agents.is_empty() {
        stages.remove(0);
    }
    Ok(Decomposition { stages })
}

/// The game after stages `0..=stage`.
pub fn game_after(game: &CausalGame, decomposition: &Decomposition, stage: usize) -> Result<CausalGame> {
    let mut g = game.clone();
    for s in decomposition.stages.iter().take(stage + 1) {
        for step in &s.steps {
            g = apply_primitive(&g, &step.primitive)?.game;
        }
    }
    Ok(g)
}
