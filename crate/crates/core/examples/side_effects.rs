//! Mechanism dependencies an intervention removes, and the cheapest way to
//! break a given one.

use causal_games::graph::NodeId;
use causal_games::intervention::{minimum_intervention_set, side_effects, PrimitiveIntervention};
use causal_games::io::fixtures;

fn main() -> causal_games::Result<()> {
    let game = fixtures::job_market();
    let p = PrimitiveIntervention::do_value(&game, "D1", "g")?;
    let r = side_effects(&game, &p)?;
    println!("{p}");
    println!(
        "  removed: {:?}",
        r.removed.iter().map(|(a, b)| format!("{a} -> {b}")).collect::<Vec<_>>()
    );
    println!(
        "  added: {:?}",
        r.added.iter().map(|(a, b)| format!("{a} -> {b}")).collect::<Vec<_>>()
    );
    println!("  predicted removals found: {}", r.prediction_holds());

    for name in ["job_market", "stackelberg"] {
        let g = fixtures::fixture(name)?;
        let set = minimum_intervention_set(&g, &NodeId::rule("D1"), &NodeId::rule("D2"))?;
        println!("{name}: fix {set:?} to cut PI_D1 -> PI_D2");
    }
    Ok(())
}
