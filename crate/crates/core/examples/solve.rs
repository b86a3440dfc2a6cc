//! Pure and behavioral equilibria of the bundled games.

use causal_games::equilibrium::{behavioral_nash_small, pure_nash, verify_rational_outcome, EPS_EQ};
use causal_games::io::fixtures;
use causal_games::io::report::{profile_text, short};

fn main() -> causal_games::Result<()> {
    for name in fixtures::NAMES {
        let game = fixtures::fixture(name)?;
        let ne = pure_nash(&game)?;
        println!("{name}: {} pure equilibria", ne.len());
        for (p, u) in ne.outcomes.iter().zip(&ne.payoffs) {
            assert!(verify_rational_outcome(&game, p, EPS_EQ)?);
            let u: Vec<String> = u.iter().map(|x| short(*x)).collect();
            println!("  {}  E = ({})", profile_text(&game, p), u.join(", "));
        }
    }

    // The job market has a continuum of mixed equilibria besides the pure ones.
    let game = fixtures::job_market();
    for family in behavioral_nash_small(&game)? {
        let summary: Vec<String> = family
            .blocks
            .iter()
            .zip(family.intervals())
            .flat_map(|(b, iv)| {
                b.contexts.iter().zip(iv).map(move |(c, (lo, hi))| {
                    format!(
                        "P({}={} | {c}) in [{}, {}]",
                        b.decision,
                        b.actions[0],
                        short(lo),
                        short(hi)
                    )
                })
            })
            .collect();
        println!("family: {}", summary.join("; "));
    }
    Ok(())
}
