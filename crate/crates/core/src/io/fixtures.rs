//! Games bundled with the crate.

use crate::error::{Error, Result};
use crate::io::game_format::parse_game;
use crate::model::CausalGame;

pub const JOB_MARKET: &str = include_str!("../../fixtures/job_market.cg");
pub const EFFORTVILLE: &str = include_str!("../../fixtures/effortville.cg");
pub const PRISONERS_DILEMMA: &str = include_str!("../../fixtures/prisoners_dilemma.cg");
pub const STACKELBERG: &str = include_str!("../../fixtures/stackelberg.cg");

/// Names of the bundled games.
pub const NAMES: [&str; 4] = ["job_market", "effortville", "prisoners_dilemma", "stackelberg"];

/// Source text of a bundled game.
pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "job_market" => Some(JOB_MARKET),
        "effortville" => Some(EFFORTVILLE),
        "prisoners_dilemma" => Some(PRISONERS_DILEMMA),
        "stackelberg" => Some(STACKELBERG),
        _ => None,
    }
}

/// Parses a bundled game.
pub fn fixture(name: &str) -> Result<CausalGame> {
    let text = source(name).ok_or_else(|| Error::UnknownVariable(format!("fixture {name}")))?;
    parse_game(text)
}

pub fn job_market() -> CausalGame {
    fixture("job_market").expect("bundled fixture parses")
}

pub fn effortville() -> CausalGame {
    fixture("effortville").expect("bundled fixture parses")
}

pub fn prisoners_dilemma() -> CausalGame {
    fixture("prisoners_dilemma").expect("bundled fixture parses")
}

pub fn stackelberg() -> CausalGame {
    fixture("stackelberg").expect("bundled fixture parses")
}
