use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::model::{
    validate_game, CausalGame, DecisionRule, DecisionStatus, Rationality, TabularCpd, Variable, VariableEntry, EPS_PROB,
};

/// New value of a mechanism node.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismValue {
    /// A CPD for a parameter node, over the variable's current parents.
    Param(TabularCpd),
    /// A rationality for a decision-rule node.
    Rule(Rationality),
}

/// How a child of an added variable takes the new parent into account.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChildUpdate {
    pub child: String,
    /// Replacement table over the child's old parents plus the new variable.
    /// `None` duplicates the existing rows, so the new parent is ignored.
    pub table: Option<TabularCpd>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Primitive {
    /// Replace a variable's parents and CPD. A decision given a CPD stops
    /// listening to its rule; a decision given `None` keeps (or regains) its
    /// rule over the new parents.
    FixObject {
        target: String,
        parents: Vec<String>,
        cpd: Option<TabularCpd>,
    },
    /// Set a parameter node to a CPD or a rule node to a rationality.
    FixMechanism { target: NodeId, value: MechanismValue },
    AddVariable {
        variable: Variable,
        parents: Vec<String>,
        cpd: Option<TabularCpd>,
        rationality: Rationality,
        children: Vec<ChildUpdate>,
        /// Index in the variable order; `None` appends.
        position: Option<usize>,
    },
    /// Remove a variable. Children without a replacement table have it
    /// integrated out under its own CPD.
    RemoveVariable {
        target: String,
        replacements: Vec<(String, TabularCpd)>,
    },
}

impl Primitive {
    /// The object-level variable the primitive acts on.
    pub fn variable(&self) -> &str {
        match self {
            Primitive::FixObject { target, .. } | Primitive::RemoveVariable { target, .. } => target,
            Primitive::FixMechanism { target, .. } => target.variable(),
            Primitive::AddVariable { variable, .. } => &variable.name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Primitive::FixObject { .. } => "fix_object",
            Primitive::FixMechanism { .. } => "fix_mechanism",
            Primitive::AddVariable { .. } => "add_var",
            Primitive::RemoveVariable { .. } => "remove_var",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::FixObject { target, parents, cpd } => {
                write!(f, "fix_object {target} | [{}]", parents.join(", "))?;
                if cpd.is_none() {
                    f.write_str(" (rule)")?;
                }
                Ok(())
            }
            Primitive::FixMechanism { target, value } => match value {
                MechanismValue::Param(_) => write!(f, "fix_mechanism {target} := table"),
                MechanismValue::Rule(Rationality::BestResponse) => {
                    write!(f, "fix_mechanism {target} := best_response")
                }
                MechanismValue::Rule(Rationality::Fixed(_)) => write!(f, "fix_mechanism {target} := rule"),
            },
            Primitive::AddVariable { variable, parents, .. } => {
                write!(f, "add_var {} | [{}]", variable.name, parents.join(", "))
            }
            Primitive::RemoveVariable { target, .. } => write!(f, "remove_var {target}"),
        }
    }
}

/// Entries replaced by an application, kept so it can be undone exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Journal {
    position: usize,
    target: Option<VariableEntry>,
    children: Vec<VariableEntry>,
}

/// A primitive intervention, with the pre-image of its last application.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrimitiveIntervention {
    #[serde(flatten)]
    pub primitive: Primitive,
    #[serde(skip)]
    journal: Option<Journal>,
}

impl From<Primitive> for PrimitiveIntervention {
    fn from(primitive: Primitive) -> Self {
        PrimitiveIntervention {
            primitive,
            journal: None,
        }
    }
}

impl fmt::Display for PrimitiveIntervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.primitive.fmt(f)
    }
}

impl PrimitiveIntervention {
    pub fn new(primitive: Primitive) -> Self {
        primitive.into()
    }

    pub fn journal(&self) -> Option<&Journal> {
        self.journal.as_ref()
    }

    /// The same intervention without its journal.
    pub fn unjournaled(&self) -> Self {
        self.primitive.clone().into()
    }

    /// `Do(X = value)`: no parents and a point mass.
    pub fn do_value(game: &CausalGame, variable: &str, value: &str) -> Result<Self> {
        let card = game.require(variable)?.variable.card();
        let v = game.value_index(variable, value)?;
        Ok(Primitive::FixObject {
            target: variable.to_string(),
            parents: Vec::new(),
            cpd: Some(TabularCpd::delta(variable, card, Vec::new(), Vec::new(), v)),
        }
        .into())
    }

    /// `Do(Θ_V = table)`.
    pub fn fix_param(cpd: TabularCpd) -> Self {
        Primitive::FixMechanism {
            target: NodeId::param(cpd.variable()),
            value: MechanismValue::Param(cpd),
        }
        .into()
    }

    /// `Do(Π_D = rule)`.
    pub fn commit(rule: DecisionRule) -> Self {
        Primitive::FixMechanism {
            target: NodeId::rule(rule.variable()),
            value: MechanismValue::Rule(Rationality::Fixed(rule)),
        }
        .into()
    }

    /// Returns the rule node of `decision` to best response.
    pub fn release(decision: &str) -> Self {
        Primitive::FixMechanism {
            target: NodeId::rule(decision),
            value: MechanismValue::Rule(Rationality::BestResponse),
        }
        .into()
    }
}

/// Result of applying a primitive.
#[derive(Clone, Debug)]
pub struct Applied {
    pub game: CausalGame,
    /// The intervention with its journal filled in.
    pub record: PrimitiveIntervention,
}

/// Applies `p` to a copy of `game`.
pub fn apply_primitive(game: &CausalGame, p: &PrimitiveIntervention) -> Result<Applied> {
    let mut g = game.clone();
    let journal = match &p.primitive {
        Primitive::FixObject { target, parents, cpd } => fix_object(&mut g, target, parents, cpd.as_ref())?,
        Primitive::FixMechanism { target, value } => fix_mechanism(&mut g, target, value)?,
        Primitive::AddVariable {
            variable,
            parents,
            cpd,
            rationality,
            children,
            position,
        } => add_variable(
            &mut g,
            variable,
            parents,
            cpd.as_ref(),
            rationality,
            children,
            *position,
        )?,
        Primitive::RemoveVariable { target, replacements } => remove_variable(&mut g, target, replacements)?,
    };
    check(&g)?;
    Ok(Applied {
        game: g,
        record: PrimitiveIntervention {
            primitive: p.primitive.clone(),
            journal: Some(journal),
        },
    })
}

/// Applies a sequence in order, returning the final game and the records.
pub fn apply_all(game: &CausalGame, ps: &[PrimitiveIntervention]) -> Result<(CausalGame, Vec<PrimitiveIntervention>)> {
    let mut g = game.clone();
    let mut records = Vec::with_capacity(ps.len());
    for p in ps {
        let a = apply_primitive(&g, p)?;
        g = a.game;
        records.push(a.record);
    }
    Ok((g, records))
}

/// The intervention that undoes an applied one.
pub fn invert(p: &PrimitiveIntervention) -> Result<PrimitiveIntervention> {
    let j = p.journal.as_ref().ok_or(Error::NoJournal)?;
    let table_of = |e: &VariableEntry| -> Option<TabularCpd> {
        match (&e.cpd, &e.rationality) {
            (Some(c), _) => Some(c.clone()),
            (None, Rationality::Fixed(r)) => Some(r.cpd().clone()),
            (None, Rationality::BestResponse) => None,
        }
    };
    let inverse = match &p.primitive {
        Primitive::FixObject { target, .. } => {
            let old = j.target.as_ref().expect("fix journal");
            Primitive::FixObject {
                target: target.clone(),
                parents: old.parents.clone(),
                cpd: old.cpd.clone(),
            }
        }
        Primitive::FixMechanism { target, .. } => {
            let old = j.target.as_ref().expect("fix journal");
            let value = match target {
                NodeId::Rule(_) => MechanismValue::Rule(old.rationality.clone()),
                _ => MechanismValue::Param(old.cpd.clone().expect("parameter nodes have a CPD")),
            };
            Primitive::FixMechanism {
                target: target.clone(),
                value,
            }
        }
        Primitive::AddVariable { variable, .. } => Primitive::RemoveVariable {
            target: variable.name.clone(),
            replacements: j
                .children
                .iter()
                .filter_map(|c| table_of(c).map(|t| (c.variable.name.clone(), t)))
                .collect(),
        },
        Primitive::RemoveVariable { .. } => {
            let old = j.target.as_ref().expect("remove journal");
            Primitive::AddVariable {
                variable: old.variable.clone(),
                parents: old.parents.clone(),
                cpd: old.cpd.clone(),
                rationality: old.rationality.clone(),
                children: j
                    .children
                    .iter()
                    .map(|c| ChildUpdate {
                        child: c.variable.name.clone(),
                        table: table_of(c),
                    })
                    .collect(),
                position: Some(j.position),
            }
        }
    };
    Ok(inverse.into())
}

/// Inverses of applied records, last first.
pub fn invert_all(records: &[PrimitiveIntervention]) -> Result<Vec<PrimitiveIntervention>> {
    records.iter().rev().map(invert).collect()
}

fn check(game: &CausalGame) -> Result<()> {
    if let Err(at) = game.topological_order() {
        return Err(Error::Cycle(at));
    }
    let v = validate_game(game);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(v))
    }
}

fn check_parents(game: &CausalGame, target: &str, parents: &[String]) -> Result<()> {
    for (k, p) in parents.iter().enumerate() {
        game.require(p)?;
        if p == target {
            return Err(Error::NotApplicable(format!("`{target}` cannot be its own parent")));
        }
        if parents[..k].contains(p) {
            return Err(Error::NotApplicable(format!("parent `{p}` listed twice")));
        }
    }
    Ok(())
}

/// `table` re-expressed over `parents` (same set, any order), with its
/// cardinalities checked against the game.
fn fit(game: &CausalGame, variable: &str, table: &TabularCpd, parents: &[String]) -> Result<TabularCpd> {
    let shape = |detail: String| Error::Shape {
        variable: variable.to_string(),
        detail,
    };
    if table.variable() != variable {
        return Err(shape(format!("table is for `{}`", table.variable())));
    }
    let card = game.require(variable)?.variable.card();
    if table.card() != card {
        return Err(shape(format!("{} columns for a domain of {card}", table.card())));
    }
    let t = table.reordered(parents).ok_or_else(|| {
        shape(format!(
            "table parents [{}] differ from [{}]",
            table.parents().join(", "),
            parents.join(", ")
        ))
    })?;
    let cards: Vec<usize> = parents.iter().map(|p| game.card(p).unwrap_or(0)).collect();
    if t.parent_cards() != cards.as_slice() {
        return Err(shape("parent cardinalities differ from the domains".into()));
    }
    Ok(t)
}

/// A committed rule moved onto a new parent set: added parents are ignored,
/// dropped parents must not matter.
pub(crate) fn reexpress(
    game: &CausalGame,
    decision: &str,
    rule: &DecisionRule,
    parents: &[String],
) -> Result<DecisionRule> {
    let mut t = rule.cpd().clone();
    for p in rule.parents() {
        if !parents.contains(p) {
            t = t.drop_parent(p, EPS_PROB).ok_or_else(|| Error::NeedsReplacement {
                removed: p.clone(),
                child: decision.to_string(),
                reason: "the committed rule depends on it".into(),
            })?;
        }
    }
    for p in parents {
        if !t.parents().contains(p) {
            t = t.with_parent_appended(p, game.card(p).unwrap_or(0));
        }
    }
    Ok(DecisionRule::new(fit(game, decision, &t, parents)?))
}

fn fix_object(game: &mut CausalGame, target: &str, parents: &[String], cpd: Option<&TabularCpd>) -> Result<Journal> {
    let old = game.require(target)?.clone();
    check_parents(game, target, parents)?;
    let position = game.index_of(target).expect("present");
    let new_cpd = match cpd {
        Some(t) => Some(fit(game, target, t, parents)?),
        None if old.variable.is_decision() => None,
        None => {
            return Err(Error::NotApplicable(format!(
                "fixing `{target}` needs a table: only decisions may be left to their rule"
            )))
        }
    };
    let rationality = match (&old.rationality, &new_cpd) {
        (Rationality::Fixed(rule), None) => Rationality::Fixed(reexpress(game, target, rule, parents)?),
        (r, _) => r.clone(),
    };
    let e = game.entry_mut(target).expect("present");
    e.parents = parents.to_vec();
    e.cpd = new_cpd;
    e.rationality = rationality;
    Ok(Journal {
        position,
        target: Some(old),
        children: Vec::new(),
    })
}

fn fix_mechanism(game: &mut CausalGame, target: &NodeId, value: &MechanismValue) -> Result<Journal> {
    let name = match target {
        NodeId::Var(_) => return Err(Error::NotApplicable(format!("`{target}` is not a mechanism node"))),
        _ => target.variable(),
    };
    let old = game.require(name)?.clone();
    let position = game.index_of(name).expect("present");
    match (target, value) {
        (NodeId::Param(_), MechanismValue::Param(t)) => {
            if old.variable.is_decision() {
                return Err(Error::NotApplicable(format!(
                    "decision `{name}` has a rule node, not a parameter node"
                )));
            }
            let t = fit(game, name, t, &old.parents).map_err(|e| match e {
                Error::Shape { detail, .. } if detail.contains("differ from [") => Error::NotApplicable(format!(
                    "a parameter fix keeps the parents of `{name}`; use fix_object to change them"
                )),
                e => e,
            })?;
            game.entry_mut(name).expect("present").cpd = Some(t);
        }
        (NodeId::Rule(_), MechanismValue::Rule(r)) => {
            if !old.variable.is_decision() {
                return Err(Error::NotADecision(name.to_string()));
            }
            let r = match r {
                Rationality::Fixed(rule) => {
                    Rationality::Fixed(DecisionRule::new(fit(game, name, rule.cpd(), &old.parents)?))
                }
                Rationality::BestResponse => Rationality::BestResponse,
            };
            game.entry_mut(name).expect("present").rationality = r;
        }
        _ => {
            return Err(Error::NotApplicable(format!(
                "value does not match the kind of `{target}`"
            )))
        }
    }
    Ok(Journal {
        position,
        target: Some(old),
        children: Vec::new(),
    })
}

fn add_variable(
    game: &mut CausalGame,
    variable: &Variable,
    parents: &[String],
    cpd: Option<&TabularCpd>,
    rationality: &Rationality,
    children: &[ChildUpdate],
    position: Option<usize>,
) -> Result<Journal> {
    let name = variable.name.as_str();
    if game.entry(name).is_some() {
        return Err(Error::NotApplicable(format!("variable `{name}` already exists")));
    }
    check_parents(game, name, parents)?;
    if cpd.is_none() && !variable.is_decision() {
        return Err(Error::NotApplicable(format!("new variable `{name}` needs a CPD")));
    }
    if matches!(rationality, Rationality::Fixed(_)) && !variable.is_decision() {
        return Err(Error::NotADecision(name.to_string()));
    }
    let position = position.unwrap_or(game.len()).min(game.len());
    game.entries_mut().insert(
        position,
        VariableEntry {
            variable: variable.clone(),
            parents: parents.to_vec(),
            cpd: None,
            rationality: Rationality::BestResponse,
        },
    );
    // Tables are fitted once the variable exists so its cardinality resolves.
    let fitted_cpd = cpd.map(|t| fit(game, name, t, parents)).transpose()?;
    let fitted_rule = match rationality {
        Rationality::Fixed(r) if fitted_cpd.is_none() => {
            Rationality::Fixed(DecisionRule::new(fit(game, name, r.cpd(), parents)?))
        }
        r => r.clone(),
    };
    {
        let e = game.entry_mut(name).expect("inserted");
        e.cpd = fitted_cpd;
        e.rationality = fitted_rule;
    }

    let card = variable.card();
    let mut old_children = Vec::new();
    for (k, u) in children.iter().enumerate() {
        if children[..k].iter().any(|v| v.child == u.child) {
            return Err(Error::NotApplicable(format!("child `{}` listed twice", u.child)));
        }
        if u.child == name {
            return Err(Error::NotApplicable(format!("`{name}` cannot be its own child")));
        }
        let old = game.require(&u.child)?.clone();
        if old.parents.iter().any(|p| p == name) {
            return Err(Error::NotApplicable(format!(
                "`{name}` is already a parent of `{}`",
                u.child
            )));
        }
        let mut new_parents = old.parents.clone();
        new_parents.push(name.to_string());
        let status = game.decision_status(&u.child);
        let mut e = old.clone();
        match (&u.table, &old.cpd) {
            (None, Some(c)) => e.cpd = Some(c.with_parent_appended(name, card)),
            (Some(t), Some(_)) => {
                let set: Vec<String> = t.parents().to_vec();
                let t = fit(game, &u.child, t, &reorder_like(&set, &new_parents))?;
                new_parents = t.parents().to_vec();
                e.cpd = Some(t);
            }
            (Some(t), None) => {
                if status != Some(DecisionStatus::Committed) {
                    return Err(Error::NotApplicable(format!(
                        "free decision `{}` takes no table; its rule is chosen by the agent",
                        u.child
                    )));
                }
                let set: Vec<String> = t.parents().to_vec();
                let t = fit(game, &u.child, t, &reorder_like(&set, &new_parents))?;
                new_parents = t.parents().to_vec();
                e.rationality = Rationality::Fixed(DecisionRule::new(t));
            }
            (None, None) => {}
        }
        if let (None, Rationality::Fixed(r)) = (&e.cpd, &old.rationality) {
            if u.table.is_none() {
                e.rationality = Rationality::Fixed(reexpress(game, &u.child, r, &new_parents)?);
            }
        }
        e.parents = new_parents;
        *game.entry_mut(&u.child).expect("present") = e;
        old_children.push(old);
    }
    Ok(Journal {
        position,
        target: None,
        children: old_children,
    })
}

/// `order` if it is a permutation of `expected`, else `expected` (and the
/// table fit reports the mismatch).
fn reorder_like(order: &[String], expected: &[String]) -> Vec<String> {
    let mut a = order.to_vec();
    let mut b = expected.to_vec();
    a.sort();
    b.sort();
    if a == b {
        order.to_vec()
    } else {
        expected.to_vec()
    }
}

fn remove_variable(game: &mut CausalGame, target: &str, replacements: &[(String, TabularCpd)]) -> Result<Journal> {
    let removed = game.require(target)?.clone();
    let position = game.index_of(target).expect("present");
    let children: Vec<String> = game.children(target).into_iter().map(str::to_string).collect();
    for (c, _) in replacements {
        if !children.contains(c) {
            return Err(Error::NotApplicable(format!(
                "replacement given for `{c}`, which is not a child of `{target}`"
            )));
        }
    }
    // Distribution of the removed variable, if it has one of its own.
    let own_table = match (&removed.cpd, &removed.rationality) {
        (Some(c), _) => Some(c.clone()),
        (None, Rationality::Fixed(r)) => Some(r.cpd().clone()),
        _ => None,
    };
    let mut old_children = Vec::new();
    let mut updated = Vec::new();
    for c in &children {
        let old = game.require(c)?.clone();
        let remaining: Vec<String> = old.parents.iter().filter(|p| *p != target).cloned().collect();
        let mut e = old.clone();
        let replacement = replacements.iter().find(|(n, _)| n == c).map(|(_, t)| t);
        match (replacement, &old.cpd) {
            (Some(t), _) => {
                let order = reorder_like(t.parents(), &remaining);
                let fitted = fit(game, c, t, &order)?;
                e.parents = order;
                if old.cpd.is_some() {
                    e.cpd = Some(fitted);
                } else if game.decision_status(c) == Some(DecisionStatus::Committed) {
                    e.rationality = Rationality::Fixed(DecisionRule::new(fitted));
                } else {
                    return Err(Error::NotApplicable(format!(
                        "free decision `{c}` takes no table; its rule is chosen by the agent"
                    )));
                }
            }
            (None, Some(cpd)) => {
                let new_cpd = match cpd.drop_parent(target, EPS_PROB) {
                    Some(t) => t,
                    None => integrate_out(target, own_table.as_ref(), c, cpd)?,
                };
                e.parents = remaining;
                e.cpd = Some(new_cpd);
            }
            (None, None) => {
                if let Rationality::Fixed(r) = &old.rationality {
                    e.rationality = Rationality::Fixed(reexpress(game, c, r, &remaining)?);
                }
                e.parents = remaining;
            }
        }
        updated.push(e);
        old_children.push(old);
    }
    for e in updated {
        let name = e.variable.name.clone();
        *game.entry_mut(&name).expect("present") = e;
    }
    game.entries_mut().remove(position);
    Ok(Journal {
        position,
        target: Some(removed),
        children: old_children,
    })
}

/// Child table with `target` summed out under `target`'s own CPD, which may
/// only condition on parents the child keeps.
fn integrate_out(target: &str, own_table: Option<&TabularCpd>, child: &str, cpd: &TabularCpd) -> Result<TabularCpd> {
    let needs = |reason: String| Error::NeedsReplacement {
        removed: target.to_string(),
        child: child.to_string(),
        reason,
    };
    let Some(own) = own_table else {
        return Err(needs(format!("decision `{target}` has no fixed distribution")));
    };
    let remaining: Vec<&String> = cpd.parents().iter().filter(|p| *p != target).collect();
    let mut positions = Vec::new();
    for p in own.parents() {
        match remaining.iter().position(|q| *q == p) {
            Some(k) => positions.push(k),
            None => {
                return Err(needs(format!(
                    "`{target}` depends on `{p}`, which is not a parent of `{child}`"
                )))
            }
        }
    }
    cpd.marginalize_parent(target, |rest| {
        let ctx: Vec<usize> = positions.iter().map(|&k| rest[k]).collect();
        Ok(own.row(own.row_index(&ctx)).to_vec())
    })
}
