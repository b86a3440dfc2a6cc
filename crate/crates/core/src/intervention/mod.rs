//! Interventions on causal games: the four primitives, derived edge edits,
//! staged decomposition by visibility, and their mechanism-level effects.

mod analysis;
mod decompose;
mod derived;
mod primitive;

pub use analysis::{
    edge_diff, hit_sets, incentive_invariant, incentive_report, minimum_intervention_set, path_uses_edge,
    severed_removals, side_effects, InvarianceReport, MechEdge, SideEffectReport,
};
pub use decompose::{
    decompose, game_after, visible_game, DecomposeOptions, Decomposition, LabelledIntervention, Stage, Step,
    VisibilityMap,
};
pub use derived::{add_edge, remove_edge, unfix};
pub use primitive::{
    apply_all, apply_primitive, invert, invert_all, Applied, ChildUpdate, Journal, MechanismValue, Primitive,
    PrimitiveIntervention,
};

/// Replaces `X`'s fix by its removal followed by a re-addition, reusing the
/// current tables of `X`'s children.
pub fn trivial_decomposition(
    game: &crate::model::CausalGame,
    p: &PrimitiveIntervention,
) -> crate::Result<Vec<PrimitiveIntervention>> {
    trivial::split(game, p)
}

mod trivial;

#[cfg(test)]
mod tests;
