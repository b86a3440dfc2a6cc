//! File formats, bundled fixtures and report rendering.

pub mod dot;
mod expr;
pub mod fixtures;
pub mod game_format;
pub mod report;
pub mod scenario;

use std::collections::BTreeMap;
use std::path::Path;

pub use dot::{export_dot, DotKind};
pub use fixtures::fixture;
pub use game_format::{parse_game, parse_game_with, write_game};
pub use scenario::{load_scenario, parse_scenario, Scenario};

use crate::error::{Error, Result};
use crate::model::CausalGame;

/// Loads a game from a path, or from the bundled fixture of that name when
/// no such file exists.
pub fn load_game(path: impl AsRef<Path>) -> Result<CausalGame> {
    load_game_with(path, &BTreeMap::new())
}

pub fn load_game_with(path: impl AsRef<Path>, overrides: &BTreeMap<String, f64>) -> Result<CausalGame> {
    let path = path.as_ref();
    if !path.exists() {
        if let Some(text) = path.to_str().and_then(fixtures::source) {
            return parse_game_with(text, overrides);
        }
        return Err(Error::UnknownGame(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_game_with(&text, overrides)
}
