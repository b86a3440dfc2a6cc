//! Whether interventions leave every agent's incentives intact.

use causal_games::intervention::{incentive_report, remove_edge, PrimitiveIntervention};
use causal_games::io::fixtures;

fn main() -> causal_games::Result<()> {
    let game = fixtures::job_market();

    // Reweighting the prior on T changes numbers, not dependencies.
    let mut prior = game.entry("T").and_then(|e| e.cpd.clone()).expect("T has a table");
    prior.row_mut(0).copy_from_slice(&[0.8, 0.2]);
    let reweight = PrimitiveIntervention::fix_param(prior);

    let hide = remove_edge(&game, "D1", "D2", None)?;

    for (name, p) in [("reweight T", reweight), ("hide D1 from D2", hide)] {
        let r = incentive_report(&game, &[p])?;
        println!("{name}: invariant = {}", r.is_invariant());
        for (a, b) in &r.broken {
            println!("  broken {a} -> {b}");
        }
        for (a, b) in &r.created {
            println!("  created {a} -> {b}");
        }
    }
    Ok(())
}
