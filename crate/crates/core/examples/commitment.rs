//! The value of commitment for a Stackelberg leader.

use std::path::Path;

use causal_games::equilibrium::{optimal_commitment, CommitMode};
use causal_games::io::report::{profile_text, short};
use causal_games::io::{fixtures, load_scenario};
use causal_games::model::PolicyProfile;
use causal_games::query::evaluate_query;

fn main() -> causal_games::Result<()> {
    let game = fixtures::stackelberg();
    for mode in [CommitMode::Exact, CommitMode::Grid { step: 0.01 }] {
        let c = optimal_commitment(&game, 1, mode)?;
        let rule = PolicyProfile::new().with(c.decision.clone(), c.rule.clone());
        println!(
            "{mode:?}: commit {}, follower plays {}, leader gets {}",
            profile_text(&game, &rule),
            profile_text(&game, &c.followers),
            short(c.leader_payoff)
        );
    }

    // A pure commitment to B pays only if the follower learns of it.
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios");
    for file in ["commit_revealed.scn", "commit_private.scn"] {
        let s = load_scenario(dir.join(file))?;
        let r = evaluate_query(&s.job(None)?)?;
        println!("{file}: E[1] = {:?}", r.verdict);
    }
    Ok(())
}
