//! Machine-readable reports.

use serde::Serialize;
use serde_json::{json, Value};

use crate::model::{CausalGame, PolicyProfile};

/// Version tag of every JSON report.
pub const SCHEMA: &str = "causal-games/v1";

/// Wraps a command's result as `{"schema", "command", "result"}`.
pub fn envelope(command: &str, result: impl Serialize) -> Value {
    json!({
        "schema": SCHEMA,
        "command": command,
        "result": result,
    })
}

/// A profile as decision -> context -> action distribution, using value
/// labels.
pub fn profile_json(game: &CausalGame, profile: &PolicyProfile) -> Value {
    let mut out = serde_json::Map::new();
    for (d, rule) in profile.iter() {
        out.insert(d.to_string(), rule_json(game, rule.cpd()));
    }
    Value::Object(out)
}

fn rule_json(game: &CausalGame, cpd: &crate::model::TabularCpd) -> Value {
    let domain = game.variable(cpd.variable()).map(|v| v.domain.clone());
    let label = |var: &str, i: usize| -> String {
        game.variable(var)
            .map_or(i.to_string(), |v| v.domain.label(i).to_string())
    };
    let mut rows = serde_json::Map::new();
    for (ctx, row) in cpd.contexts().zip(cpd.rows()) {
        let key = ctx
            .iter()
            .zip(cpd.parents())
            .map(|(v, p)| format!("{p}={}", label(p, *v)))
            .collect::<Vec<_>>()
            .join(",");
        let mut dist = serde_json::Map::new();
        for (i, p) in row.iter().enumerate() {
            if *p != 0.0 {
                let name = domain.as_ref().map_or(i.to_string(), |d| d.label(i).to_string());
                dist.insert(name, json!(p));
            }
        }
        rows.insert(key, Value::Object(dist));
    }
    Value::Object(rows)
}

/// A number rounded to six decimals for display, without trailing zeros.
pub fn short(value: f64) -> String {
    let text = format!("{value:.6}");
    let text = text.trim_end_matches('0').trim_end_matches('.');
    if text == "-0" {
        "0".to_string()
    } else {
        text.to_string()
    }
}

/// A profile in one line, e.g. `D1: T | D2: L` or `D2: g->j ng->nj`.
pub fn profile_text(game: &CausalGame, profile: &PolicyProfile) -> String {
    profile
        .iter()
        .map(|(d, rule)| format!("{d}: {}", rule_text(game, rule.cpd())))
        .collect::<Vec<_>>()
        .join(" | ")
}

fn rule_text(game: &CausalGame, cpd: &crate::model::TabularCpd) -> String {
    let var = game.variable(cpd.variable());
    let value = |i: usize| var.map_or(i.to_string(), |v| v.domain.label(i).to_string());
    let dist = |row: &[f64]| -> String {
        let support: Vec<(usize, f64)> = row.iter().copied().enumerate().filter(|(_, p)| *p != 0.0).collect();
        match support[..] {
            [(i, _)] => value(i),
            _ => support
                .iter()
                .map(|(i, p)| format!("{}:{}", value(*i), short(*p)))
                .collect::<Vec<_>>()
                .join("/"),
        }
    };
    if cpd.parents().is_empty() {
        return dist(cpd.row(0));
    }
    cpd.contexts()
        .zip(cpd.rows())
        .map(|(ctx, row)| {
            let key: Vec<String> = ctx
                .iter()
                .zip(cpd.parents())
                .map(|(v, p)| {
                    game.variable(p)
                        .map_or(v.to_string(), |x| x.domain.label(*v).to_string())
                })
                .collect();
            format!("{}->{}", key.join(","), dist(row))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::short;

    #[test]
    fn short_numbers() {
        assert_eq!(short(2.0 / 3.0), "0.666667");
        assert_eq!(short(0.33999999999999997), "0.34");
        assert_eq!(short(-4.5), "-4.5");
        assert_eq!(short(-1e-12), "0");
        assert_eq!(short(17.0), "17");
    }
}
