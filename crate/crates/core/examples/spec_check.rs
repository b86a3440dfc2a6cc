//! Checking that a policy moves an outcome in the intended direction whatever
//! equilibrium is reached.

use causal_games::intervention::PrimitiveIntervention;
use causal_games::io::fixtures;
use causal_games::query::{check_spec_env, SpecDirection};

fn main() -> causal_games::Result<()> {
    let game = fixtures::job_market();
    let policies = [
        ("do(T=h)", vec![PrimitiveIntervention::do_value(&game, "T", "h")?]),
        ("nothing", vec![]),
    ];
    for (name, ps) in &policies {
        for behavioral in [false, true] {
            let c = check_spec_env(&game, ps, &[("D2", "j")], SpecDirection::Increase, behavioral)?;
            println!(
                "{name:8} behavioral={behavioral:5}: P(D2=j) before {:?} after {:?} holds {}",
                c.before, c.after, c.holds
            );
        }
    }
    Ok(())
}
