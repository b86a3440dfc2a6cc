//! The line-oriented `.cg` game format.
//!
//! ```text
//! agents 2
//! param p = 1/2
//! chance T : h l
//! decision D1 @1 : g ng | T
//! utility U1 @1 : 0 1 | D1
//! cpd T
//!   = p 1-p
//! cpd U1
//!   g -> 1
//!   ng -> 0
//! ```
//!
//! Table rows list the parent values (or `*` for any value) followed by
//! either `= probabilities...` or `-> value` for a point mass. A `cpd` block on
//! a decision fixes the decision itself; a `rule` block fixes its decision
//! rule. Cells accept arithmetic over numbers and declared parameters.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::io::expr;
use crate::model::{
    format_real, validate_game, Assignments, CausalGame, DecisionRule, Domain, Rationality, TabularCpd, VarKind,
    Variable, VariableEntry, Violation,
};

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tok<'a> {
    pub text: &'a str,
    pub col: usize,
}

pub(crate) fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let body = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in body.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(tok(body, s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(tok(body, s, body.len()));
    }
    out
}

fn tok(line: &str, start: usize, end: usize) -> Tok<'_> {
    Tok {
        text: &line[start..end],
        col: line[..start].chars().count() + 1,
    }
}

pub(crate) struct Decl<'a> {
    pub kind: VarKind,
    pub name: Tok<'a>,
    pub agent: Option<usize>,
    pub domain: Option<Vec<Tok<'a>>>,
    pub parents: Vec<Tok<'a>>,
    pub line: usize,
}

pub(crate) struct Block<'a> {
    pub name: Tok<'a>,
    pub rule: bool,
    pub line: usize,
    pub rows: Vec<(usize, Vec<Tok<'a>>)>,
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_')
}

pub(crate) fn is_label(s: &str) -> bool {
    !s.is_empty() && !matches!(s, "|" | ":" | "=" | "->" | "*") && !s.contains(['|', '=', ','])
}

pub fn parse_game(text: &str) -> Result<CausalGame> {
    parse_game_with(text, &BTreeMap::new())
}

/// Parses a game, replacing the values of declared parameters with
/// `overrides`.
pub fn parse_game_with(text: &str, overrides: &BTreeMap<String, f64>) -> Result<CausalGame> {
    let mut agents: Option<usize> = None;
    let mut params: BTreeMap<String, f64> = BTreeMap::new();
    let mut decls: Vec<Decl> = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut in_block = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokenize(raw);
        if toks.is_empty() {
            continue;
        }
        let indented = raw.starts_with([' ', '\t']);
        if indented {
            if !in_block {
                return Err(Error::parse(
                    line,
                    toks[0].col,
                    "indented row outside a cpd or rule block",
                ));
            }
            blocks.last_mut().expect("in block").rows.push((line, toks));
            continue;
        }
        in_block = false;
        let head = toks[0];
        match head.text {
            "agents" => {
                let n = toks
                    .get(1)
                    .and_then(|t| t.text.parse::<usize>().ok())
                    .filter(|n| *n > 0)
                    .ok_or_else(|| Error::parse(line, head.col, "expected `agents <count>`"))?;
                expect_end(&toks, 2, line)?;
                agents = Some(n);
            }
            "rationality" => {
                match toks.get(1) {
                    Some(t) if t.text == "best_response" => {}
                    Some(t) => {
                        return Err(Error::parse(
                            line,
                            t.col,
                            format!("unsupported rationality `{}`", t.text),
                        ))
                    }
                    None => return Err(Error::parse(line, head.col, "expected `rationality best_response`")),
                }
                expect_end(&toks, 2, line)?;
            }
            "param" => {
                let name = toks
                    .get(1)
                    .filter(|t| is_ident(t.text))
                    .ok_or_else(|| Error::parse(line, head.col, "expected `param <name> = <value>`"))?;
                if toks.get(2).map(|t| t.text) != Some("=") || toks.len() < 4 {
                    return Err(Error::parse(
                        line,
                        name.col,
                        "expected `= <value>` after the parameter name",
                    ));
                }
                let body: String = toks[3..].iter().map(|t| t.text).collect();
                let value = match overrides.get(name.text) {
                    Some(v) => *v,
                    None => expr::eval(&body, &params).map_err(|m| Error::parse(line, toks[3].col, m))?,
                };
                params.insert(name.text.to_string(), value);
            }
            "chance" | "decision" | "utility" => decls.push(parse_decl(&toks, line)?),
            "cpd" | "rule" => {
                let name = toks
                    .get(1)
                    .ok_or_else(|| Error::parse(line, head.col, format!("expected `{} <variable>`", head.text)))?;
                expect_end(&toks, 2, line)?;
                blocks.push(Block {
                    name: *name,
                    rule: head.text == "rule",
                    line,
                    rows: Vec::new(),
                });
                in_block = true;
            }
            other => {
                return Err(Error::parse(line, head.col, format!("unknown keyword `{other}`")));
            }
        }
    }
    if let Some(unused) = overrides.keys().find(|k| !params.contains_key(*k)) {
        return Err(Error::parse(
            1,
            1,
            format!("override for undeclared parameter `{unused}`"),
        ));
    }
    let agents = agents.ok_or_else(|| Error::parse(1, 1, "missing `agents` line"))?;
    build(agents, &params, decls, blocks)
}

fn expect_end(toks: &[Tok], n: usize, line: usize) -> Result<()> {
    match toks.get(n) {
        Some(t) => Err(Error::parse(line, t.col, format!("unexpected `{}`", t.text))),
        None => Ok(()),
    }
}

pub(crate) fn parse_decl<'a>(toks: &[Tok<'a>], line: usize) -> Result<Decl<'a>> {
    let kind = match toks[0].text {
        "chance" => VarKind::Chance,
        "decision" => VarKind::Decision,
        _ => VarKind::Utility,
    };
    let name = *toks
        .get(1)
        .filter(|t| is_ident(t.text))
        .ok_or_else(|| Error::parse(line, toks[0].col, "expected a variable name"))?;
    let mut i = 2;
    let mut agent = None;
    if kind != VarKind::Chance {
        let t = toks
            .get(i)
            .ok_or_else(|| Error::parse(line, name.col, "expected `@<agent>`"))?;
        agent = Some(
            t.text
                .strip_prefix('@')
                .and_then(|a| a.parse::<usize>().ok())
                .ok_or_else(|| Error::parse(line, t.col, "expected `@<agent>`"))?,
        );
        i += 1;
    }
    let mut domain = None;
    if toks.get(i).map(|t| t.text) == Some(":") {
        let start = i + 1;
        let mut end = start;
        while end < toks.len() && toks[end].text != "|" {
            end += 1;
        }
        if end == start {
            return Err(Error::parse(line, toks[i].col, "empty domain"));
        }
        for t in &toks[start..end] {
            if !is_label(t.text) {
                return Err(Error::parse(line, t.col, format!("bad value `{}`", t.text)));
            }
        }
        domain = Some(toks[start..end].to_vec());
        i = end;
    } else if kind != VarKind::Utility {
        return Err(Error::parse(line, name.col, "expected `: <values>`"));
    }
    let mut parents = Vec::new();
    if let Some(t) = toks.get(i) {
        if t.text != "|" {
            return Err(Error::parse(line, t.col, format!("unexpected `{}`", t.text)));
        }
        for p in &toks[i + 1..] {
            if !is_ident(p.text) {
                return Err(Error::parse(line, p.col, format!("bad parent name `{}`", p.text)));
            }
            parents.push(*p);
        }
    }
    Ok(Decl {
        kind,
        name,
        agent,
        domain,
        parents,
        line,
    })
}

/// Splits a row at its `=` or `->` separator.
fn split_row<'a, 'b>(toks: &'b [Tok<'a>], line: usize) -> Result<(&'b [Tok<'a>], bool, &'b [Tok<'a>])> {
    let pos = toks
        .iter()
        .position(|t| t.text == "=" || t.text == "->")
        .ok_or_else(|| Error::parse(line, toks[0].col, "expected `=` or `->` in table row"))?;
    Ok((&toks[..pos], toks[pos].text == "->", &toks[pos + 1..]))
}

fn build(agents: usize, params: &BTreeMap<String, f64>, decls: Vec<Decl>, blocks: Vec<Block>) -> Result<CausalGame> {
    let mut decl_line: HashMap<String, usize> = HashMap::new();
    for d in &decls {
        if decl_line.insert(d.name.text.to_string(), d.line).is_some() {
            return Err(Error::parse(
                d.line,
                d.name.col,
                format!("`{}` declared twice", d.name.text),
            ));
        }
    }
    let mut block_of: HashMap<&str, Vec<&Block>> = HashMap::new();
    for b in &blocks {
        if !decl_line.contains_key(b.name.text) {
            return Err(Error::parse(
                b.line,
                b.name.col,
                format!("unknown variable `{}`", b.name.text),
            ));
        }
        block_of.entry(b.name.text).or_default().push(b);
    }

    // Domains first; utilities without an explicit domain take the values
    // that appear in their point-mass rows.
    let mut domains: HashMap<String, Domain> = HashMap::new();
    for d in &decls {
        let domain = match (&d.domain, d.kind) {
            (Some(vals), VarKind::Utility) => Domain::reals(
                vals.iter()
                    .map(|t| expr::eval(t.text, params).map_err(|m| Error::parse(d.line, t.col, m)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            (Some(vals), _) => Domain::labels(vals.iter().map(|t| t.text)),
            (None, _) => {
                let mut values: Vec<f64> = Vec::new();
                for b in block_of.get(d.name.text).into_iter().flatten() {
                    for (line, row) in &b.rows {
                        let (_, point, rhs) = split_row(row, *line)?;
                        if !point {
                            return Err(Error::parse(
                                *line,
                                row[0].col,
                                "utility without a declared domain needs `->` rows",
                            ));
                        }
                        for t in rhs {
                            values.push(expr::eval(t.text, params).map_err(|m| Error::parse(*line, t.col, m))?);
                        }
                    }
                }
                values.sort_by(|a, b| a.total_cmp(b));
                values.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
                Domain::reals(values)
            }
        };
        domains.insert(d.name.text.to_string(), domain);
    }

    let mut entries = Vec::new();
    let mut row_lines: HashMap<(String, usize), usize> = HashMap::new();
    for d in &decls {
        for p in &d.parents {
            if !domains.contains_key(p.text) {
                return Err(Error::parse(d.line, p.col, format!("unknown parent `{}`", p.text)));
            }
        }
        let name = d.name.text.to_string();
        let variable = Variable {
            name: name.clone(),
            kind: d.kind,
            agent: d.agent,
            domain: domains[&name].clone(),
        };
        let parents: Vec<String> = d.parents.iter().map(|t| t.text.to_string()).collect();
        let mut cpd = None;
        let mut rationality = Rationality::BestResponse;
        for b in block_of.get(d.name.text).into_iter().flatten() {
            let table = parse_table(b, &variable, &parents, &domains, params, &mut row_lines)?;
            if b.rule {
                if d.kind != VarKind::Decision {
                    return Err(Error::parse(
                        b.line,
                        b.name.col,
                        "`rule` blocks apply to decisions only",
                    ));
                }
                if matches!(rationality, Rationality::Fixed(_)) {
                    return Err(Error::parse(b.line, b.name.col, "second `rule` block"));
                }
                rationality = Rationality::Fixed(DecisionRule::new(table));
            } else {
                if cpd.is_some() {
                    return Err(Error::parse(b.line, b.name.col, "second `cpd` block"));
                }
                cpd = Some(table);
            }
        }
        entries.push(VariableEntry {
            variable,
            parents,
            cpd,
            rationality,
        });
    }
    let game = CausalGame::from_entries(agents, entries);
    let report = validate_game(&game);
    if report.is_empty() {
        return Ok(game);
    }
    Err(Error::Invalid(
        report.into_iter().map(|v| locate(v, &decl_line, &row_lines)).collect(),
    ))
}

/// Prefixes a violation with the file line it comes from.
fn locate(v: Violation, decl_line: &HashMap<String, usize>, row_lines: &HashMap<(String, usize), usize>) -> Violation {
    let line = match v.subject.split_once("[row ") {
        Some((name, rest)) => rest
            .trim_end_matches(']')
            .parse::<usize>()
            .ok()
            .and_then(|r| row_lines.get(&(name.to_string(), r)).copied()),
        None => decl_line.get(&v.subject).copied(),
    };
    match line {
        Some(l) => Violation {
            subject: format!("line {l}: {}", v.subject),
            message: v.message,
        },
        None => v,
    }
}

pub(crate) fn parse_table(
    b: &Block,
    variable: &Variable,
    parents: &[String],
    domains: &HashMap<String, Domain>,
    params: &BTreeMap<String, f64>,
    row_lines: &mut HashMap<(String, usize), usize>,
) -> Result<TabularCpd> {
    let cards: Vec<usize> = parents.iter().map(|p| domains[p].len()).collect();
    let n_rows: usize = cards.iter().product();
    let card = variable.card();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n_rows];
    for (line, toks) in &b.rows {
        let line = *line;
        let (ctx, point, rhs) = split_row(toks, line)?;
        if ctx.len() != parents.len() {
            return Err(Error::parse(
                line,
                toks[0].col,
                format!("expected {} parent values, found {}", parents.len(), ctx.len()),
            ));
        }
        let row = if point {
            let [t] = rhs else {
                return Err(Error::parse(line, toks[0].col, "expected one value after `->`"));
            };
            let idx = if variable.domain.is_numeric() {
                let x = expr::eval(t.text, params).map_err(|m| Error::parse(line, t.col, m))?;
                variable
                    .domain
                    .real_values()
                    .and_then(|r| r.iter().position(|y| (x - y).abs() < 1e-9))
            } else {
                variable.domain.index_of(t.text)
            }
            .ok_or_else(|| {
                Error::parse(
                    line,
                    t.col,
                    format!("`{}` is not a value of `{}`", t.text, variable.name),
                )
            })?;
            let mut r = vec![0.0; card];
            r[idx] = 1.0;
            r
        } else {
            if rhs.len() != card {
                let col = rhs.first().map_or(toks[0].col, |t| t.col);
                return Err(Error::parse(
                    line,
                    col,
                    format!("expected {card} probabilities, found {}", rhs.len()),
                ));
            }
            rhs.iter()
                .map(|t| expr::eval(t.text, params).map_err(|m| Error::parse(line, t.col, m)))
                .collect::<Result<Vec<_>>>()?
        };
        // Expand wildcards into the matching parent instantiations.
        let mut choices: Vec<Vec<usize>> = Vec::new();
        for (t, p) in ctx.iter().zip(parents) {
            if t.text == "*" {
                choices.push((0..domains[p].len()).collect());
            } else {
                let i = domains[p]
                    .index_of(t.text)
                    .ok_or_else(|| Error::parse(line, t.col, format!("`{}` is not a value of `{p}`", t.text)))?;
                choices.push(vec![i]);
            }
        }
        let sizes: Vec<usize> = choices.iter().map(Vec::len).collect();
        for pick in Assignments::new(sizes) {
            let values: Vec<usize> = pick.iter().zip(&choices).map(|(k, c)| c[*k]).collect();
            let r = values.iter().zip(&cards).fold(0, |acc, (v, c)| acc * c + v);
            if rows[r].is_some() {
                return Err(Error::parse(line, toks[0].col, "row overlaps an earlier row"));
            }
            rows[r] = Some(row.clone());
            row_lines.insert((variable.name.clone(), r), line);
        }
    }
    if let Some(missing) = rows.iter().position(Option::is_none) {
        let ctx = Assignments::new(cards.clone()).nth(missing).unwrap_or_default();
        let labels: Vec<&str> = ctx.iter().zip(parents).map(|(v, p)| domains[p].label(*v)).collect();
        return Err(Error::parse(
            b.line,
            b.name.col,
            format!("no row for `{}` given ({})", variable.name, labels.join(", ")),
        ));
    }
    TabularCpd::new(
        variable.name.clone(),
        card,
        parents.to_vec(),
        cards,
        rows.into_iter().map(|r| r.expect("checked")).collect(),
    )
}

/// Writes a game in the `.cg` format. Parameters are written out as numbers.
pub fn write_game(game: &CausalGame) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "agents {}", game.agents());
    let _ = writeln!(out, "rationality best_response");
    out.push('\n');
    for e in game.entries() {
        let v = &e.variable;
        let _ = write!(out, "{} {}", v.kind, v.name);
        if let Some(a) = v.agent {
            let _ = write!(out, " @{a}");
        }
        let _ = write!(out, " : {}", v.domain.all_labels().join(" "));
        if !e.parents.is_empty() {
            let _ = write!(out, " | {}", e.parents.join(" "));
        }
        out.push('\n');
    }
    for e in game.entries() {
        if let Some(cpd) = &e.cpd {
            write_table(&mut out, game, "cpd", cpd);
        }
        if let Rationality::Fixed(rule) = &e.rationality {
            write_table(&mut out, game, "rule", rule.cpd());
        }
    }
    out
}

fn write_table(out: &mut String, game: &CausalGame, keyword: &str, cpd: &TabularCpd) {
    let _ = writeln!(out, "\n{keyword} {}", cpd.variable());
    let domain = &game.variable(cpd.variable()).expect("table of a game variable").domain;
    for (r, ctx) in cpd.contexts().enumerate() {
        out.push(' ');
        for (v, p) in ctx.iter().zip(cpd.parents()) {
            let label = game.variable(p).map_or("?", |pv| pv.domain.label(*v));
            let _ = write!(out, " {label}");
        }
        let row = cpd.row(r);
        let point = row.iter().position(|p| *p == 1.0);
        match point {
            Some(i) if domain.is_numeric() => {
                let _ = writeln!(out, " -> {}", domain.label(i));
            }
            _ => {
                let cells: Vec<String> = row.iter().map(|p| format_real(*p)).collect();
                let _ = writeln!(out, " = {}", cells.join(" "));
            }
        }
    }
}
