//! Interventions, equilibria and mechanism analysis for causal games.

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod graph;
pub mod intervention;
pub mod io;
pub mod model;
pub mod query;

pub use error::{Error, Result};
