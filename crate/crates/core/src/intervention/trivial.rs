use crate::error::{Error, Result};
use crate::intervention::primitive::{reexpress, ChildUpdate, Primitive, PrimitiveIntervention};
use crate::model::{CausalGame, Rationality, TabularCpd};

/// `fix_object X` as `remove_var X` then `add_var X`. Children get a
/// placeholder table while `X` is absent and their own table back after.
pub(super) fn split(game: &CausalGame, p: &PrimitiveIntervention) -> Result<Vec<PrimitiveIntervention>> {
    let Primitive::FixObject { target, parents, cpd } = &p.primitive else {
        return Err(Error::NotApplicable(format!(
            "{} is not an object-level fix",
            p.primitive.kind()
        )));
    };
    let old = game.require(target)?;
    let position = game.index_of(target).expect("present");
    let card = old.variable.card();
    let mut replacements = Vec::new();
    let mut children = Vec::new();
    for c in game.children(target) {
        let e = game.require(c)?;
        let table = match (&e.cpd, &e.rationality) {
            (Some(t), _) => Some(t.clone()),
            (None, Rationality::Fixed(r)) => Some(r.cpd().clone()),
            (None, Rationality::BestResponse) => None,
        };
        if let Some(t) = &table {
            let placeholder: TabularCpd = t.marginalize_parent(target, |_| Ok(vec![1.0 / card as f64; card]))?;
            replacements.push((c.to_string(), placeholder));
        }
        children.push(ChildUpdate {
            child: c.to_string(),
            table,
        });
    }
    let rationality = match (&old.rationality, cpd) {
        (Rationality::Fixed(r), None) => Rationality::Fixed(reexpress(game, target, r, parents)?),
        (r, _) => r.clone(),
    };
    Ok(vec![
        Primitive::RemoveVariable {
            target: target.clone(),
            replacements,
        }
        .into(),
        Primitive::AddVariable {
            variable: old.variable.clone(),
            parents: parents.clone(),
            cpd: cpd.clone(),
            rationality,
            children,
            position: Some(position),
        }
        .into(),
    ])
}
