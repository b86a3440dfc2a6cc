//! The `cgame` command line.
//!
//! Exit codes: 0 on success, 1 when the game, scenario or query is at fault
//! (or a check fails), 2 on a usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::equilibrium::{behavioral_nash_small, optimal_commitment, pure_nash_eps, CommitMode, EPS_EQ};
use crate::error::Error;
use crate::graph::{build_mechanised_graph, NodeId};
use crate::intervention::{
    apply_primitive, incentive_report, minimum_intervention_set, side_effects, LabelledIntervention,
    PrimitiveIntervention,
};
use crate::io::report::{envelope, profile_json, profile_text, short};
use crate::io::{export_dot, load_game_with, load_scenario, write_game, DotKind, Scenario};
use crate::model::{validate_game, CausalGame};
use crate::query::{classify_visibility, evaluate_query, parse_query, LeafValue, Verdict};

#[derive(Parser, Debug)]
#[command(
    name = "cgame",
    version,
    about = "Interventions, equilibria and mechanism analysis for causal games"
)]
struct Cli {
    /// Emit a JSON report.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for sampled queries.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance for equilibrium deviations and query comparisons.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GameArg {
    /// A `.cg` file or a bundled game name.
    game: String,
    /// Override a game parameter, as `name=value`.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
}

#[derive(Args, Debug)]
struct Target {
    /// A `.scn` scenario, or a game combined with `--do`.
    input: String,
    /// Hard intervention `X=v` on a game, applied in order.
    #[arg(long = "do", value_name = "X=v")]
    dos: Vec<String>,
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a game file.
    Validate(GameArg),
    /// List the pure equilibria and their payoffs.
    Solve {
        #[command(flatten)]
        game: GameArg,
        /// Also list families of behavioral equilibria.
        #[arg(long)]
        behavioral: bool,
    },
    /// Print the edges between mechanisms, or the graph as DOT.
    MechGraph {
        #[command(flatten)]
        game: GameArg,
        /// Print graphviz text of the given graph.
        #[arg(long, value_name = "KIND")]
        dot: Option<DotKind>,
    },
    /// Apply interventions and print the resulting game.
    Intervene(Target),
    /// Mechanism edges each intervention removes or adds.
    SideEffects(Target),
    /// Smallest set of variables to fix to cut a mechanism dependency.
    MinSet {
        #[command(flatten)]
        game: GameArg,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    /// Whether the interventions keep every mechanism dependency intact.
    Invariant(Target),
    /// Evaluate a scenario's query.
    Query {
        scenario: String,
        /// Query text replacing the scenario's.
        #[arg(long)]
        query: Option<String>,
    },
    /// The leader's best rule to commit to.
    Commit {
        #[command(flatten)]
        game: GameArg,
        #[arg(long, default_value_t = 1)]
        leader: usize,
        /// Sweep a grid with this step instead of solving exactly.
        #[arg(long)]
        grid: Option<f64>,
    },
}

/// Captured result of one invocation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the command line; `argv[0]` is the program name.
pub fn cli_run<I, T>(argv: I) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                CliOutput {
                    code: 2,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                CliOutput {
                    code: 0,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    match run(&cli) {
        Ok((code, stdout)) => CliOutput {
            code,
            stdout,
            stderr: String::new(),
        },
        Err(e) => {
            let code = if matches!(e, Usage(_)) { 2 } else { 1 };
            CliOutput {
                code,
                stdout: String::new(),
                stderr: format!("error: {}\n", e.message()),
            }
        }
    }
}

enum Failure {
    Usage(String),
    Domain(Error),
}
use Failure::Usage;

impl Failure {
    fn message(&self) -> String {
        match self {
            Usage(m) => m.clone(),
            Failure::Domain(e) => e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type Outcome = std::result::Result<(i32, String), Failure>;

fn params(raw: &[String]) -> std::result::Result<BTreeMap<String, f64>, Failure> {
    raw.iter()
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Usage(format!("expected NAME=VALUE, got `{p}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| Usage(format!("`{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn load(arg: &GameArg) -> std::result::Result<CausalGame, Failure> {
    Ok(load_game_with(&arg.game, &params(&arg.params)?)?)
}

fn target(t: &Target) -> std::result::Result<(CausalGame, Vec<LabelledIntervention>), Failure> {
    if t.input.ends_with(".scn") {
        if !t.dos.is_empty() || !t.params.is_empty() {
            return Err(Usage("--do and --param apply to games, not scenarios".into()));
        }
        let s: Scenario = load_scenario(&t.input)?;
        return Ok((s.game, s.interventions));
    }
    let game = load_game_with(&t.input, &params(&t.params)?)?;
    let mut running = game.clone();
    let mut out = Vec::new();
    for (k, d) in t.dos.iter().enumerate() {
        let (x, v) = d
            .split_once('=')
            .ok_or_else(|| Usage(format!("expected X=v, got `{d}`")))?;
        let p = PrimitiveIntervention::do_value(&running, x.trim(), v.trim())?;
        running = apply_primitive(&running, &p)?.game;
        out.push(LabelledIntervention::new(format!("do{}", k + 1), p));
    }
    Ok((game, out))
}

fn json_text(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&v).expect("serialisable");
    s.push('\n');
    s
}

fn node(text: &str) -> std::result::Result<NodeId, Failure> {
    let n = NodeId::parse(text);
    if !n.is_mechanism() {
        return Err(Usage(format!("`{text}` is not a mechanism node (use PI_X or THETA_X)")));
    }
    Ok(n)
}

fn edges_text(edges: &[(NodeId, NodeId)]) -> String {
    if edges.is_empty() {
        return "none".into();
    }
    edges
        .iter()
        .map(|(a, b)| format!("{a} -> {b}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn run(cli: &Cli) -> Outcome {
    let eps = cli.epsilon.unwrap_or(EPS_EQ);
    if eps.is_nan() || eps < 0.0 {
        return Err(Usage("--epsilon must be non-negative".into()));
    }
    let mut out = String::new();
    match &cli.command {
        Command::Validate(arg) => {
            // Parse errors and failed validation both come back as errors.
            let game = match load(arg) {
                Ok(g) => g,
                Err(Failure::Domain(Error::Invalid(vs))) => {
                    if cli.json {
                        let list: Vec<String> = vs.iter().map(ToString::to_string).collect();
                        return Ok((
                            1,
                            json_text(envelope("validate", json!({ "valid": false, "violations": list }))),
                        ));
                    }
                    for v in vs {
                        let _ = writeln!(out, "{v}");
                    }
                    return Ok((1, out));
                }
                Err(e) => return Err(e),
            };
            debug_assert!(validate_game(&game).is_empty());
            if cli.json {
                return Ok((
                    0,
                    json_text(envelope("validate", json!({ "valid": true, "violations": [] }))),
                ));
            }
            let count = |n: usize, what: &str| format!("{n} {what}{}", if n == 1 { "" } else { "s" });
            let _ = writeln!(
                out,
                "ok: {}, {}, {}",
                count(game.len(), "variable"),
                count(game.agents(), "agent"),
                count(game.decisions().len(), "decision")
            );
        }
        Command::Solve { game, behavioral } => {
            let game = load(game)?;
            let ne = pure_nash_eps(&game, eps)?;
            let families = if *behavioral {
                behavioral_nash_small(&game)?
            } else {
                Vec::new()
            };
            if cli.json {
                let outcomes: Vec<Value> = ne
                    .outcomes
                    .iter()
                    .zip(&ne.payoffs)
                    .map(|(p, u)| json!({ "profile": profile_json(&game, p), "utilities": u }))
                    .collect();
                let mut result = json!({ "pure": outcomes });
                if *behavioral {
                    result["behavioral"] = json!(families);
                }
                return Ok((0, json_text(envelope("solve", result))));
            }
            let _ = writeln!(out, "pure equilibria: {}", ne.len());
            for (p, u) in ne.outcomes.iter().zip(&ne.payoffs) {
                let us: Vec<String> = u.iter().map(|x| short(*x)).collect();
                let _ = writeln!(out, "  {}  E = ({})", profile_text(&game, p), us.join(", "));
            }
            if *behavioral {
                let _ = writeln!(out, "behavioral families: {}", families.len());
                for f in &families {
                    let parts: Vec<String> = f
                        .blocks
                        .iter()
                        .zip(f.intervals())
                        .map(|(b, iv)| {
                            let ranges: Vec<String> = b
                                .contexts
                                .iter()
                                .zip(iv)
                                .map(|(c, (lo, hi))| {
                                    let ctx = if c.is_empty() { String::new() } else { format!("[{c}]") };
                                    if (hi - lo).abs() < 1e-12 {
                                        format!("P({}={}){ctx} = {}", b.decision, b.actions[0], short(lo))
                                    } else {
                                        format!(
                                            "P({}={}){ctx} in [{}, {}]",
                                            b.decision,
                                            b.actions[0],
                                            short(lo),
                                            short(hi)
                                        )
                                    }
                                })
                                .collect();
                            ranges.join(", ")
                        })
                        .collect();
                    let _ = writeln!(out, "  {}", parts.join("; "));
                }
            }
        }
        Command::MechGraph { game, dot } => {
            let game = load(game)?;
            if let Some(kind) = dot {
                return Ok((0, export_dot(&game, *kind)?));
            }
            let mech = build_mechanised_graph(&game)?;
            let edges: Vec<(NodeId, NodeId)> = mech.inter_edges().iter().cloned().collect();
            if cli.json {
                let list: Vec<Value> = edges.iter().map(|(a, b)| json!([a, b])).collect();
                return Ok((0, json_text(envelope("mech-graph", json!({ "inter_edges": list })))));
            }
            for (a, b) in &edges {
                let _ = writeln!(out, "{a} -> {b}");
            }
        }
        Command::Intervene(t) => {
            let (game, items) = target(t)?;
            let mut running = game;
            for i in &items {
                running = apply_primitive(&running, &i.intervention)?.game;
            }
            if cli.json {
                let applied: Vec<String> = items
                    .iter()
                    .map(|i| format!("{}: {}", i.label, i.intervention))
                    .collect();
                return Ok((
                    0,
                    json_text(envelope(
                        "intervene",
                        json!({ "applied": applied, "game": write_game(&running) }),
                    )),
                ));
            }
            out = write_game(&running);
        }
        Command::SideEffects(t) => {
            let (game, items) = target(t)?;
            let mut running = game;
            let mut reports = Vec::new();
            for i in &items {
                let r = side_effects(&running, &i.intervention)?;
                running = apply_primitive(&running, &i.intervention)?.game;
                reports.push((i, r));
            }
            if cli.json {
                let list: Vec<Value> = reports
                    .iter()
                    .map(|(i, r)| json!({ "label": i.label, "intervention": i.intervention.to_string(), "report": r, "prediction_holds": r.prediction_holds() }))
                    .collect();
                return Ok((0, json_text(envelope("side-effects", list))));
            }
            for (i, r) in &reports {
                let _ = writeln!(out, "{}: {}", i.label, i.intervention);
                let _ = writeln!(out, "  removed: {}", edges_text(&r.removed));
                let _ = writeln!(out, "  added: {}", edges_text(&r.added));
                if !r.predicted_removed.is_empty() {
                    let _ = writeln!(out, "  predicted removals: {}", edges_text(&r.predicted_removed));
                }
            }
        }
        Command::MinSet { game, from, to } => {
            let game = load(game)?;
            let set = minimum_intervention_set(&game, &node(from)?, &node(to)?)?;
            if cli.json {
                return Ok((
                    0,
                    json_text(envelope("min-set", json!({ "from": from, "to": to, "set": set }))),
                ));
            }
            let names: Vec<&str> = set.iter().map(String::as_str).collect();
            let _ = writeln!(out, "{{{}}}", names.join(", "));
        }
        Command::Invariant(t) => {
            let (game, items) = target(t)?;
            let prims: Vec<PrimitiveIntervention> = items.iter().map(|i| i.intervention.clone()).collect();
            let r = incentive_report(&game, &prims)?;
            let code = if r.is_invariant() { 0 } else { 1 };
            if cli.json {
                return Ok((
                    code,
                    json_text(envelope(
                        "invariant",
                        json!({ "invariant": r.is_invariant(), "report": r }),
                    )),
                ));
            }
            let _ = writeln!(out, "invariant: {}", r.is_invariant());
            let _ = writeln!(out, "  broken: {}", edges_text(&r.broken));
            let _ = writeln!(out, "  created: {}", edges_text(&r.created));
            return Ok((code, out));
        }
        Command::Query { scenario, query } => {
            let mut s = load_scenario(scenario)?;
            if let Some(text) = query {
                s.query = Some(parse_query(text)?);
            }
            let mut job = s.job(cli.seed)?;
            if let Some(e) = cli.epsilon {
                job.query.eps = e;
            }
            let result = evaluate_query(&job)?;
            let classes = classify_visibility(&job)?;
            if cli.json {
                return Ok((
                    0,
                    json_text(envelope(
                        "query",
                        json!({
                            "query": job.query.to_string(),
                            "seed": job.seed,
                            "verdict": result.verdict,
                            "visibility": classes,
                            "decomposition": result.decomposition,
                            "leaves": result.leaves.iter().map(|l| json!({
                                "value": l.value,
                                "utilities": l.utilities,
                                "chosen": profile_json(&s.game, &l.profile),
                                "played": profile_json(&s.game, &l.played),
                                "stages": l.stages,
                            })).collect::<Vec<_>>(),
                        }),
                    )),
                ));
            }
            write_query(&mut out, &s, &job, &result, &classes);
        }
        Command::Commit { game, leader, grid } => {
            let game = load(game)?;
            let mode = match grid {
                Some(step) if *step > 0.0 && *step <= 1.0 => CommitMode::Grid { step: *step },
                Some(_) => return Err(Usage("--grid step must be in (0, 1]".into())),
                None => CommitMode::Exact,
            };
            let c = optimal_commitment(&game, *leader, mode)?;
            let rule = crate::model::PolicyProfile::new().with(c.decision.clone(), c.rule.clone());
            if cli.json {
                return Ok((
                    0,
                    json_text(envelope(
                        "commit",
                        json!({
                            "decision": c.decision,
                            "rule": profile_json(&game, &rule),
                            "leader_payoff": c.leader_payoff,
                            "followers": profile_json(&game, &c.followers),
                        }),
                    )),
                ));
            }
            let _ = writeln!(out, "commit {}", profile_text(&game, &rule));
            let _ = writeln!(out, "followers {}", profile_text(&game, &c.followers));
            let _ = writeln!(out, "leader payoff {}", short(c.leader_payoff));
        }
    }
    Ok((0, out))
}

fn write_query(
    out: &mut String,
    s: &Scenario,
    job: &crate::query::QueryJob,
    result: &crate::query::QueryResult,
    classes: &BTreeMap<usize, crate::query::VisibilityClass>,
) {
    let _ = writeln!(out, "query: {}", job.query);
    let verdict = match &result.verdict {
        Verdict::Bool(b) => b.to_string(),
        Verdict::Real(v) => short(*v),
        Verdict::Values(vs) => {
            let parts: Vec<String> = vs.iter().map(|v| short(*v)).collect();
            format!("{{{}}}", parts.join(", "))
        }
    };
    let _ = writeln!(out, "verdict: {verdict}");
    let _ = writeln!(out, "stages:");
    for (j, st) in result.decomposition.stages.iter().enumerate() {
        let steps: Vec<String> = st
            .steps
            .iter()
            .map(|x| {
                if x.inverse {
                    format!("undo {}", x.label)
                } else {
                    x.label.clone()
                }
            })
            .collect();
        let steps = if steps.is_empty() {
            "-".to_string()
        } else {
            steps.join(", ")
        };
        let agents: Vec<String> = st.agents.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "  {j}: apply {steps}; agents {{{}}}", agents.join(", "));
    }
    let tags: Vec<String> = classes
        .iter()
        .map(|(a, c)| format!("{a}={}", serde_json::to_value(c).expect("tag").as_str().unwrap_or("?")))
        .collect();
    let _ = writeln!(out, "visibility: {}", tags.join(" "));
    let _ = writeln!(out, "leaves: {}", result.leaves.len());
    for l in &result.leaves {
        let value = match l.value {
            LeafValue::Bool(b) => b.to_string(),
            LeafValue::Real(v) => short(v),
        };
        let _ = writeln!(out, "  {}  => {value}", profile_text(&s.game, &l.played));
    }
}

/// Entry point of the binary.
pub fn main_with_args() -> i32 {
    let o = cli_run(std::env::args_os());
    print!("{}", o.stdout);
    eprint!("{}", o.stderr);
    o.code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> CliOutput {
        cli_run(std::iter::once("cgame").chain(args.iter().copied()))
    }

    #[test]
    fn solve_prisoners_dilemma() {
        let o = run(&["solve", "prisoners_dilemma"]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        assert_eq!(o.stdout, "pure equilibria: 1\n  D1: D | D2: D  E = (-2, -2)\n");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(&["solve"]).code, 2);
        assert_eq!(run(&["frobnicate"]).code, 2);
        assert_eq!(run(&["--help"]).code, 0);
        assert_eq!(run(&["solve", "no_such_game"]).code, 1);
        assert_eq!(run(&["min-set", "job_market", "--from", "D1", "--to", "PI_D2"]).code, 2);
        assert_eq!(run(&["solve", "job_market", "--param", "p"]).code, 2);
    }

    #[test]
    fn min_set_and_commit() {
        assert_eq!(
            run(&["min-set", "job_market", "--from", "PI_D1", "--to", "PI_D2"]).stdout,
            "{D1}\n"
        );
        let o = run(&["commit", "stackelberg", "--leader", "1"]);
        assert!(o.stdout.contains("leader payoff 3.666667"), "{}", o.stdout);
    }
}
