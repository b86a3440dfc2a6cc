//! Splitting partially visible interventions into stages.

use std::path::Path;

use causal_games::intervention::{decompose, game_after, visible_game};
use causal_games::io::load_scenario;

fn main() -> causal_games::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios");
    for file in ["rewards_alice_sees.scn", "rewards_alice_first.scn"] {
        let s = load_scenario(dir.join(file))?;
        let d = decompose(&s.game, &s.interventions, &s.visibility, &s.options)?;
        println!("{file}");
        for (j, stage) in d.stages.iter().enumerate() {
            let steps: Vec<String> = stage
                .steps
                .iter()
                .map(|st| {
                    if st.inverse {
                        format!("undo {}", st.label)
                    } else {
                        st.label.clone()
                    }
                })
                .collect();
            println!("  stage {j}: {steps:?} then agents {:?} choose", stage.agents);
            let after = game_after(&s.game, &d, j)?;
            for &agent in &stage.agents {
                let seen = visible_game(&s.game, &s.interventions, &s.visibility, agent)?;
                assert_eq!(after, seen);
            }
        }
    }
    Ok(())
}
