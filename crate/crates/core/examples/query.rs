//! Evaluating queries over scenarios, by every quantifier.

use std::path::Path;

use causal_games::io::load_scenario;
use causal_games::query::{classify_visibility, evaluate_query, parse_query};

fn main() -> causal_games::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios");
    let s = load_scenario(dir.join("rewards_alice_sees.scn"))?;
    for text in [
        "sampled [mix-ties]: E[total]",
        "forall ne: E[total]",
        "exists ne: P(D1=C) = 1 and E[1] <= -4",
        "forall ne: E[2] > -2.5",
    ] {
        let mut job = s.job(None)?;
        job.query = parse_query(text)?;
        let r = evaluate_query(&job)?;
        println!("{text}  ->  {:?} over {} outcome(s)", r.verdict, r.leaves.len());
    }
    println!("visibility: {:?}", classify_visibility(&s.job(None)?)?);

    // Seeds pick among equilibria reproducibly.
    let mut job = s.job(None)?;
    job.query = parse_query("sampled: E[total]")?;
    for seed in 0..4 {
        job.seed = seed;
        println!("seed {seed}: {:?}", evaluate_query(&job)?.verdict);
    }
    Ok(())
}
