//! The `.scn` scenario format: a game, labelled interventions, who sees
//! which, and a query.
//!
//! ```text
//! game prisoners_dilemma
//!
//! intervention r1 : fix_mechanism THETA_U1
//!   C C -> 0
//!   C D -> -5
//!   D C -> 0
//!   D D -> -2
//!
//! visibility 1 : r1
//! visibility 2 :
//! order 1 2
//! query sampled [mix-ties]: E[total]
//! seed 7
//! ```
//!
//! `game` names a `.cg` file relative to the scenario, or a bundled game.
//! Intervention kinds:
//!
//! - `fix_object X` keeps the parents of `X`; `fix_object X | A B` sets
//!   them. Rows give the new table. A decision without rows keeps deciding.
//! - `do X = v` fixes `X` to a value and cuts its parents.
//! - `fix_mechanism THETA_X` with rows replaces a table; `fix_mechanism PI_D`
//!   with rows commits a rule, and `fix_mechanism PI_D best_response`
//!   releases one.
//! - `add_var chance W : a b | P` declares a new variable. Rows give its
//!   table; a `child C` line followed by rows gives the new table of a child,
//!   and a bare `child C` makes the child ignore the new parent.
//! - `remove_var X`, with `replace C` lines followed by rows for children
//!   that cannot have `X` integrated out.
//! - `add_edge A -> B`, `del_edge A -> B`, and `unfix L` (undo of `L`).
//!
//! Items are resolved in file order, each against the game left by the
//! earlier ones.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::intervention::{
    add_edge, apply_primitive, invert, remove_edge, ChildUpdate, DecomposeOptions, LabelledIntervention,
    MechanismValue, Primitive, PrimitiveIntervention, VisibilityMap,
};
use crate::io::game_format::{is_ident, parse_decl, parse_table, tokenize, Block, Tok};
use crate::io::load_game_with;
use crate::model::{CausalGame, DecisionRule, Domain, Rationality, TabularCpd, VarKind, Variable};
use crate::query::{parse_query, Query, QueryJob};

#[derive(Clone, Debug)]
pub struct Scenario {
    pub game: CausalGame,
    pub interventions: Vec<LabelledIntervention>,
    pub visibility: VisibilityMap,
    pub options: DecomposeOptions,
    pub query: Option<Query>,
    pub seed: Option<u64>,
}

impl Scenario {
    /// The scenario's query as a job; `seed` overrides the file's seed.
    pub fn job(&self, seed: Option<u64>) -> Result<QueryJob> {
        let query = self
            .query
            .clone()
            .ok_or_else(|| Error::Query("scenario has no `query` line".into()))?;
        Ok(QueryJob {
            game: self.game.clone(),
            interventions: self.interventions.clone(),
            visibility: self.visibility.clone(),
            options: self.options.clone(),
            query,
            seed: seed.or(self.seed).unwrap_or(0),
        })
    }

    /// The interventions in file order, without labels.
    pub fn primitives(&self) -> Vec<PrimitiveIntervention> {
        self.interventions.iter().map(|i| i.intervention.clone()).collect()
    }
}

/// An intervention block before resolution.
struct Item<'a> {
    label: Tok<'a>,
    head: Vec<Tok<'a>>,
    line: usize,
    rows: Vec<(usize, Vec<Tok<'a>>)>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses a scenario; `base` is the directory game paths are relative to.
pub fn parse_scenario(text: &str, base: &Path) -> Result<Scenario> {
    let mut game_ref: Option<(usize, Tok)> = None;
    let mut params: BTreeMap<String, f64> = BTreeMap::new();
    let mut items: Vec<Item> = Vec::new();
    let mut visibility: Vec<(usize, usize, Vec<Tok>)> = Vec::new();
    let mut options = DecomposeOptions::default();
    let mut query = None;
    let mut seed = None;
    let mut in_item = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokenize(raw);
        if toks.is_empty() {
            continue;
        }
        if raw.starts_with([' ', '\t']) {
            if !in_item {
                return Err(Error::parse(line, toks[0].col, "indented row outside an intervention"));
            }
            items.last_mut().expect("in item").rows.push((line, toks));
            continue;
        }
        in_item = false;
        let head = toks[0];
        match head.text {
            "game" => {
                let [_, name] = toks[..] else {
                    return Err(Error::parse(line, head.col, "expected `game <file or bundled name>`"));
                };
                game_ref = Some((line, name));
            }
            "param" => {
                let ok = toks.len() == 4 && is_ident(toks[1].text) && toks[2].text == "=";
                let value = ok.then(|| toks[3].text.parse::<f64>().ok()).flatten();
                let Some(v) = value else {
                    return Err(Error::parse(line, head.col, "expected `param <name> = <number>`"));
                };
                params.insert(toks[1].text.to_string(), v);
            }
            "intervention" => {
                let label = toks
                    .get(1)
                    .filter(|t| is_ident(t.text))
                    .ok_or_else(|| Error::parse(line, head.col, "expected `intervention <label> : <kind> ...`"))?;
                if toks.get(2).map(|t| t.text) != Some(":") || toks.len() < 4 {
                    return Err(Error::parse(line, label.col, "expected `: <kind>` after the label"));
                }
                if items.iter().any(|i| i.label.text == label.text) {
                    return Err(Error::parse(
                        line,
                        label.col,
                        format!("label `{}` used twice", label.text),
                    ));
                }
                items.push(Item {
                    label: *label,
                    head: toks[3..].to_vec(),
                    line,
                    rows: Vec::new(),
                });
                in_item = true;
            }
            "visibility" => {
                let agent = toks.get(1).and_then(|t| t.text.parse::<usize>().ok());
                let (Some(agent), Some(":")) = (agent, toks.get(2).map(|t| t.text)) else {
                    return Err(Error::parse(line, head.col, "expected `visibility <agent> : <labels>`"));
                };
                visibility.push((line, agent, toks[3..].to_vec()));
            }
            "order" => {
                let order = toks[1..]
                    .iter()
                    .map(|t| {
                        t.text
                            .parse::<usize>()
                            .map_err(|_| Error::parse(line, t.col, "expected an agent"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                options.order = Some(order);
            }
            "per_agent" => options.per_agent = true,
            "query" => {
                let body = raw.split('#').next().unwrap_or("");
                let start = body.find("query").expect("head") + "query".len();
                let q = parse_query(body[start..].trim()).map_err(|e| match e {
                    Error::Parse { column, message, .. } => {
                        let offset =
                            body[..start].chars().count() + body[start..].len() - body[start..].trim_start().len();
                        Error::parse(line, offset + column, message)
                    }
                    other => other,
                })?;
                query = Some(q);
            }
            "seed" => {
                let s = toks
                    .get(1)
                    .and_then(|t| t.text.parse::<u64>().ok())
                    .ok_or_else(|| Error::parse(line, head.col, "expected `seed <integer>`"))?;
                seed = Some(s);
            }
            other => return Err(Error::parse(line, head.col, format!("unknown keyword `{other}`"))),
        }
    }

    let (gline, gname) = game_ref.ok_or_else(|| Error::parse(1, 1, "missing `game` line"))?;
    let path = base.join(gname.text);
    let game = if path.exists() {
        load_game_with(&path, &params)?
    } else {
        load_game_with(gname.text, &params).map_err(|e| match e {
            Error::Io(_) | Error::UnknownGame(_) => Error::parse(
                gline,
                gname.col,
                format!("no game file or bundled game `{}`", gname.text),
            ),
            other => other,
        })?
    };

    let mut running = game.clone();
    let mut records: HashMap<String, PrimitiveIntervention> = HashMap::new();
    let mut interventions = Vec::new();
    for item in &items {
        let p = resolve(&running, item, &records, &params)?;
        let applied =
            apply_primitive(&running, &p).map_err(|e| Error::parse(item.line, item.label.col, e.to_string()))?;
        running = applied.game;
        records.insert(item.label.text.to_string(), applied.record);
        interventions.push(LabelledIntervention::new(item.label.text, p));
    }

    let mut map = VisibilityMap::new();
    for (line, agent, labels) in visibility {
        if agent == 0 || agent > game.agents() {
            return Err(Error::parse(line, 1, format!("unknown agent {agent}")));
        }
        for l in &labels {
            if !items.iter().any(|i| i.label.text == l.text) {
                return Err(Error::parse(line, l.col, format!("unknown intervention `{}`", l.text)));
            }
        }
        map.set(agent, labels.iter().map(|t| t.text));
    }
    Ok(Scenario {
        game,
        interventions,
        visibility: map,
        options,
        query,
        seed,
    })
}

fn domains(game: &CausalGame) -> HashMap<String, Domain> {
    game.entries()
        .iter()
        .map(|e| (e.variable.name.clone(), e.variable.domain.clone()))
        .collect()
}

fn table<'a>(
    domains: &HashMap<String, Domain>,
    variable: &Variable,
    parents: &[String],
    name: Tok<'a>,
    line: usize,
    rows: Vec<(usize, Vec<Tok<'a>>)>,
    params: &BTreeMap<String, f64>,
) -> Result<TabularCpd> {
    for p in parents {
        if !domains.contains_key(p) {
            return Err(Error::parse(line, name.col, format!("unknown parent `{p}`")));
        }
    }
    let block = Block {
        name,
        rule: false,
        line,
        rows,
    };
    parse_table(&block, variable, parents, domains, params, &mut HashMap::new())
}

/// Splits rows at `child`/`replace` sub-headers: rows before the first one,
/// then each sub-header with its rows.
#[allow(clippy::type_complexity)]
fn sections<'a>(
    rows: &[(usize, Vec<Tok<'a>>)],
    keyword: &str,
) -> Result<(
    Vec<(usize, Vec<Tok<'a>>)>,
    Vec<(usize, Tok<'a>, Vec<(usize, Vec<Tok<'a>>)>)>,
)> {
    let mut own = Vec::new();
    let mut subs: Vec<(usize, Tok<'a>, Vec<(usize, Vec<Tok<'a>>)>)> = Vec::new();
    for (line, toks) in rows {
        if toks[0].text == keyword {
            let [_, name] = toks[..] else {
                return Err(Error::parse(
                    *line,
                    toks[0].col,
                    format!("expected `{keyword} <variable>`"),
                ));
            };
            subs.push((*line, name, Vec::new()));
        } else if let Some(last) = subs.last_mut() {
            last.2.push((*line, toks.clone()));
        } else {
            own.push((*line, toks.clone()));
        }
    }
    Ok((own, subs))
}

fn edge<'a>(item: &Item<'a>) -> Result<(Tok<'a>, Tok<'a>)> {
    match item.head[1..] {
        [a, arrow, b] if arrow.text == "->" => Ok((a, b)),
        _ => Err(Error::parse(
            item.line,
            item.head[0].col,
            format!("expected `{} A -> B`", item.head[0].text),
        )),
    }
}

fn no_rows(item: &Item) -> Result<()> {
    match item.rows.first() {
        Some((line, toks)) => Err(Error::parse(*line, toks[0].col, "this intervention takes no table")),
        None => Ok(()),
    }
}

fn require<'a>(game: &CausalGame, t: Tok<'a>, line: usize) -> Result<()> {
    if game.entry(t.text).is_none() {
        return Err(Error::parse(line, t.col, format!("unknown variable `{}`", t.text)));
    }
    Ok(())
}

fn resolve(
    game: &CausalGame,
    item: &Item,
    records: &HashMap<String, PrimitiveIntervention>,
    params: &BTreeMap<String, f64>,
) -> Result<PrimitiveIntervention> {
    let line = item.line;
    let kind = item.head[0];
    let at = |e: Error| Error::parse(line, kind.col, e.to_string());
    let doms = domains(game);
    match kind.text {
        "fix_object" => {
            let target = *item
                .head
                .get(1)
                .ok_or_else(|| Error::parse(line, kind.col, "expected `fix_object <variable>`"))?;
            require(game, target, line)?;
            let parents: Vec<String> = match item.head.get(2) {
                None => game.parents(target.text).to_vec(),
                Some(bar) if bar.text == "|" => item.head[3..].iter().map(|t| t.text.to_string()).collect(),
                Some(t) => return Err(Error::parse(line, t.col, format!("unexpected `{}`", t.text))),
            };
            let variable = game.variable(target.text).expect("checked").clone();
            let cpd = if item.rows.is_empty() {
                if !variable.is_decision() {
                    return Err(Error::parse(
                        line,
                        target.col,
                        "a table is needed for a non-decision variable",
                    ));
                }
                None
            } else {
                Some(table(
                    &doms,
                    &variable,
                    &parents,
                    target,
                    line,
                    item.rows.clone(),
                    params,
                )?)
            };
            Ok(Primitive::FixObject {
                target: target.text.to_string(),
                parents,
                cpd,
            }
            .into())
        }
        "do" => {
            no_rows(item)?;
            let [_, x, eq, v] = item.head[..] else {
                return Err(Error::parse(line, kind.col, "expected `do <variable> = <value>`"));
            };
            if eq.text != "=" {
                return Err(Error::parse(line, eq.col, "expected `=`"));
            }
            require(game, x, line)?;
            PrimitiveIntervention::do_value(game, x.text, v.text).map_err(|e| Error::parse(line, v.col, e.to_string()))
        }
        "fix_mechanism" => {
            let node_tok = *item
                .head
                .get(1)
                .ok_or_else(|| Error::parse(line, kind.col, "expected `fix_mechanism <node>`"))?;
            let node = NodeId::parse(node_tok.text);
            let var = node.variable().to_string();
            if !node.is_mechanism() || game.entry(&var).is_none() {
                return Err(Error::parse(
                    line,
                    node_tok.col,
                    format!("unknown mechanism node `{}`", node_tok.text),
                ));
            }
            let variable = game.variable(&var).expect("checked").clone();
            let parents = game.parents(&var).to_vec();
            let value = match (&node, item.head.get(2)) {
                (NodeId::Rule(_), Some(t)) if t.text == "best_response" => {
                    no_rows(item)?;
                    MechanismValue::Rule(Rationality::BestResponse)
                }
                (_, Some(t)) => return Err(Error::parse(line, t.col, format!("unexpected `{}`", t.text))),
                (NodeId::Rule(_), None) => {
                    let t = table(&doms, &variable, &parents, node_tok, line, item.rows.clone(), params)?;
                    MechanismValue::Rule(Rationality::Fixed(DecisionRule::new(t)))
                }
                (_, None) => MechanismValue::Param(table(
                    &doms,
                    &variable,
                    &parents,
                    node_tok,
                    line,
                    item.rows.clone(),
                    params,
                )?),
            };
            Ok(Primitive::FixMechanism { target: node, value }.into())
        }
        "add_var" => {
            let decl = parse_decl(&item.head[1..], line)?;
            if game.entry(decl.name.text).is_some() {
                return Err(Error::parse(
                    line,
                    decl.name.col,
                    format!("`{}` already exists", decl.name.text),
                ));
            }
            let values = decl
                .domain
                .as_ref()
                .ok_or_else(|| Error::parse(line, decl.name.col, "a new variable needs a domain"))?;
            let domain = if decl.kind == VarKind::Utility {
                Domain::reals(
                    values
                        .iter()
                        .map(|t| {
                            t.text
                                .parse::<f64>()
                                .map_err(|_| Error::parse(line, t.col, "expected a number"))
                        })
                        .collect::<Result<Vec<_>>>()?,
                )
            } else {
                Domain::labels(values.iter().map(|t| t.text))
            };
            let variable = Variable {
                name: decl.name.text.to_string(),
                kind: decl.kind,
                agent: decl.agent,
                domain,
            };
            let parents: Vec<String> = decl.parents.iter().map(|t| t.text.to_string()).collect();
            let (own, subs) = sections(&item.rows, "child")?;
            let cpd = if own.is_empty() {
                if !variable.is_decision() {
                    return Err(Error::parse(
                        line,
                        decl.name.col,
                        "a table is needed for a non-decision variable",
                    ));
                }
                None
            } else {
                Some(table(&doms, &variable, &parents, decl.name, line, own, params)?)
            };
            let mut with_new = doms.clone();
            with_new.insert(variable.name.clone(), variable.domain.clone());
            let mut children = Vec::new();
            for (cline, child, rows) in subs {
                require(game, child, cline)?;
                let table = if rows.is_empty() {
                    None
                } else {
                    let mut ps = game.parents(child.text).to_vec();
                    ps.push(variable.name.clone());
                    let cv = game.variable(child.text).expect("checked");
                    Some(self::table(&with_new, cv, &ps, child, cline, rows, params)?)
                };
                children.push(ChildUpdate {
                    child: child.text.to_string(),
                    table,
                });
            }
            Ok(Primitive::AddVariable {
                variable,
                parents,
                cpd,
                rationality: Rationality::BestResponse,
                children,
                position: None,
            }
            .into())
        }
        "remove_var" => {
            let [_, target] = item.head[..] else {
                return Err(Error::parse(line, kind.col, "expected `remove_var <variable>`"));
            };
            require(game, target, line)?;
            let (own, subs) = sections(&item.rows, "replace")?;
            if let Some((l, t)) = own.first() {
                return Err(Error::parse(*l, t[0].col, "expected `replace <child>` before rows"));
            }
            let mut replacements = Vec::new();
            for (cline, child, rows) in subs {
                require(game, child, cline)?;
                let ps: Vec<String> = game
                    .parents(child.text)
                    .iter()
                    .filter(|p| *p != target.text)
                    .cloned()
                    .collect();
                let cv = game.variable(child.text).expect("checked");
                replacements.push((
                    child.text.to_string(),
                    table(&doms, cv, &ps, child, cline, rows, params)?,
                ));
            }
            Ok(Primitive::RemoveVariable {
                target: target.text.to_string(),
                replacements,
            }
            .into())
        }
        "add_edge" => {
            no_rows(item)?;
            let (a, b) = edge(item)?;
            require(game, a, line)?;
            require(game, b, line)?;
            add_edge(game, a.text, b.text).map_err(at)
        }
        "del_edge" => {
            no_rows(item)?;
            let (a, b) = edge(item)?;
            require(game, a, line)?;
            require(game, b, line)?;
            remove_edge(game, a.text, b.text, None).map_err(at)
        }
        "unfix" => {
            no_rows(item)?;
            let [_, label] = item.head[..] else {
                return Err(Error::parse(line, kind.col, "expected `unfix <label>`"));
            };
            let record = records
                .get(label.text)
                .ok_or_else(|| Error::parse(line, label.col, format!("no earlier intervention `{}`", label.text)))?;
            Ok(invert(record).map_err(at)?.unjournaled())
        }
        other => Err(Error::parse(
            line,
            kind.col,
            format!("unknown intervention kind `{other}`"),
        )),
    }
}
