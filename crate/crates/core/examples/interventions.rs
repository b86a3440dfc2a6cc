//! Applying, undoing and composing interventions.

use causal_games::intervention::{add_edge, apply_primitive, invert, remove_edge, PrimitiveIntervention};
use causal_games::io::{fixtures, write_game};

fn main() -> causal_games::Result<()> {
    let game = fixtures::job_market();

    // A hard intervention keeps a journal so it can be undone exactly.
    let applied = apply_primitive(&game, &PrimitiveIntervention::do_value(&game, "T", "h")?)?;
    let back = apply_primitive(&applied.game, &invert(&applied.record)?)?;
    assert_eq!(back.game, game);
    println!("do(T=h) then its inverse restores the game");

    // Order matters: the later fix wins.
    let hl = [("T", "h"), ("T", "l")].iter().try_fold(game.clone(), |g, (x, v)| {
        apply_primitive(&g, &PrimitiveIntervention::do_value(&g, x, v)?).map(|a| a.game)
    })?;
    let lh = [("T", "l"), ("T", "h")].iter().try_fold(game.clone(), |g, (x, v)| {
        apply_primitive(&g, &PrimitiveIntervention::do_value(&g, x, v)?).map(|a| a.game)
    })?;
    println!("do(T=h) then do(T=l) equals the reverse: {}", hl == lh);

    // Removing T -> U2 mixes T out of the utility table under P(T).
    let cut = apply_primitive(&game, &remove_edge(&game, "T", "U2", None)?)?.game;
    println!("U2 parents after removing T -> U2: {:?}", cut.parents("U2"));

    // Letting the employer see T directly.
    let seen = apply_primitive(&game, &add_edge(&game, "T", "D2")?)?.game;
    println!("D2 parents after adding T -> D2: {:?}", seen.parents("D2"));

    print!("{}", write_game(&seen));
    Ok(())
}
