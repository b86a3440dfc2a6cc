use std::ops::Deref;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Assignments;

/// A conditional probability table over one variable given an ordered list of
/// parents. Rows are laid out in mixed-radix order of the parent values, first
/// parent most significant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TabularCpd {
    variable: String,
    card: usize,
    parents: Vec<String>,
    parent_cards: Vec<usize>,
    values: Vec<f64>,
}

impl TabularCpd {
    pub fn new(
        variable: impl Into<String>,
        card: usize,
        parents: Vec<String>,
        parent_cards: Vec<usize>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let variable = variable.into();
        if parents.len() != parent_cards.len() {
            return Err(Error::Shape {
                variable,
                detail: "parent list and parent cardinalities differ in length".into(),
            });
        }
        let expected: usize = parent_cards.iter().product();
        if rows.len() != expected {
            return Err(Error::Shape {
                variable,
                detail: format!("expected {expected} rows, found {}", rows.len()),
            });
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != card) {
            return Err(Error::Shape {
                variable,
                detail: format!("row {bad} has {} entries, expected {card}", rows[bad].len()),
            });
        }
        Ok(TabularCpd {
            variable,
            card,
            parents,
            parent_cards,
            values: rows.into_iter().flatten().collect(),
        })
    }

    /// Point mass on `value` regardless of the parents.
    pub fn delta(
        variable: impl Into<String>,
        card: usize,
        parents: Vec<String>,
        parent_cards: Vec<usize>,
        value: usize,
    ) -> Self {
        let n_rows: usize = parent_cards.iter().product();
        let mut row = vec![0.0; card];
        row[value] = 1.0;
        TabularCpd {
            variable: variable.into(),
            card,
            parents,
            parent_cards,
            values: row.repeat(n_rows),
        }
    }

    pub fn uniform(variable: impl Into<String>, card: usize, parents: Vec<String>, parent_cards: Vec<usize>) -> Self {
        let n_rows: usize = parent_cards.iter().product();
        TabularCpd {
            variable: variable.into(),
            card,
            parents,
            parent_cards,
            values: vec![1.0 / card as f64; card * n_rows],
        }
    }

    pub fn variable(&self) -> &str {
        &self.variable
    }

    pub fn card(&self) -> usize {
        self.card
    }

    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.parent_cards
    }

    pub fn n_rows(&self) -> usize {
        self.parent_cards.iter().product()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.values[index * self.card..(index + 1) * self.card]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        let card = self.card;
        &mut self.values[index * card..(index + 1) * card]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.card.max(1))
    }

    pub fn row_index(&self, parent_values: &[usize]) -> usize {
        parent_values
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (v, c)| acc * c + v)
    }

    pub fn prob(&self, value: usize, parent_values: &[usize]) -> f64 {
        self.row(self.row_index(parent_values))[value]
    }

    pub fn contexts(&self) -> Assignments {
        Assignments::new(self.parent_cards.clone())
    }

    /// Rows that are negative anywhere or do not sum to one within `eps`.
    pub fn bad_rows(&self, eps: f64) -> Vec<usize> {
        self.rows()
            .enumerate()
            .filter(|(_, row)| {
                row.iter().any(|p| *p < -eps || !p.is_finite()) || (row.iter().sum::<f64>() - 1.0).abs() > eps
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_pure(&self) -> bool {
        self.values.iter().all(|p| *p == 0.0 || *p == 1.0)
    }

    pub fn is_fully_stochastic(&self) -> bool {
        self.values.iter().all(|p| *p > 0.0)
    }

    /// Copy with `parent` appended as the last parent; rows are duplicated so
    /// the new parent is initially ignored.
    pub fn with_parent_appended(&self, parent: &str, card: usize) -> Self {
        let mut values = Vec::with_capacity(self.values.len() * card);
        for row in self.rows() {
            for _ in 0..card {
                values.extend_from_slice(row);
            }
        }
        let mut parents = self.parents.clone();
        parents.push(parent.to_string());
        let mut parent_cards = self.parent_cards.clone();
        parent_cards.push(card);
        TabularCpd {
            variable: self.variable.clone(),
            card: self.card,
            parents,
            parent_cards,
            values,
        }
    }

    /// Whether some row changes when only `parent` changes.
    pub fn depends_on(&self, parent: &str, eps: f64) -> bool {
        let Some(pos) = self.parents.iter().position(|p| p == parent) else {
            return false;
        };
        for ctx in self.contexts() {
            if ctx[pos] == 0 {
                continue;
            }
            let mut base = ctx.clone();
            base[pos] = 0;
            let a = self.row(self.row_index(&ctx));
            let b = self.row(self.row_index(&base));
            if a.iter().zip(b).any(|(x, y)| (x - y).abs() > eps) {
                return true;
            }
        }
        false
    }

    /// Removes `parent`, mixing the rows over its values with `weights`, which
    /// receives the values of the remaining parents (in the new order).
    pub fn marginalize_parent<F>(&self, parent: &str, mut weights: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Result<Vec<f64>>,
    {
        let pos = self
            .parents
            .iter()
            .position(|p| p == parent)
            .ok_or_else(|| Error::UnknownVariable(parent.to_string()))?;
        let mut parents = self.parents.clone();
        parents.remove(pos);
        let mut parent_cards = self.parent_cards.clone();
        let removed_card = parent_cards.remove(pos);
        let mut values = Vec::new();
        for rest in Assignments::new(parent_cards.clone()) {
            let w = weights(&rest)?;
            let mut row = vec![0.0; self.card];
            let mut full = rest.clone();
            full.insert(pos, 0);
            for (y, wy) in w.iter().enumerate().take(removed_card) {
                if *wy == 0.0 {
                    continue;
                }
                full[pos] = y;
                for (acc, p) in row.iter_mut().zip(self.row(self.row_index(&full))) {
                    *acc += wy * p;
                }
            }
            values.extend(row);
        }
        Ok(TabularCpd {
            variable: self.variable.clone(),
            card: self.card,
            parents,
            parent_cards,
            values,
        })
    }

    /// Drops `parent` if the table does not depend on it.
    pub fn drop_parent(&self, parent: &str, eps: f64) -> Option<Self> {
        if self.depends_on(parent, eps) {
            return None;
        }
        self.marginalize_parent(parent, |_| {
            let mut w = vec![0.0; 1];
            w[0] = 1.0;
            Ok(w)
        })
        .ok()
    }

    /// Re-expresses the table over `new_parents` (a permutation of the current
    /// parents).
    pub fn reordered(&self, new_parents: &[String]) -> Option<Self> {
        if new_parents.len() != self.parents.len() {
            return None;
        }
        let perm: Vec<usize> = new_parents
            .iter()
            .map(|p| self.parents.iter().position(|q| q == p))
            .collect::<Option<_>>()?;
        let new_cards: Vec<usize> = perm.iter().map(|&i| self.parent_cards[i]).collect();
        let mut values = Vec::with_capacity(self.values.len());
        let mut old = vec![0; self.parents.len()];
        for ctx in Assignments::new(new_cards.clone()) {
            for (k, &i) in perm.iter().enumerate() {
                old[i] = ctx[k];
            }
            values.extend_from_slice(self.row(self.row_index(&old)));
        }
        Some(TabularCpd {
            variable: self.variable.clone(),
            card: self.card,
            parents: new_parents.to_vec(),
            parent_cards: new_cards,
            values,
        })
    }

    /// Equality as conditional distributions: parent order may differ.
    pub fn approx_eq(&self, other: &TabularCpd, eps: f64) -> bool {
        if self.card != other.card {
            return false;
        }
        let Some(other) = other.reordered(&self.parents) else {
            return false;
        };
        other.parent_cards == self.parent_cards
            && self.values.iter().zip(&other.values).all(|(a, b)| (a - b).abs() <= eps)
    }

    /// Convex combination of tables with identical shape.
    pub fn mixture(tables: &[&TabularCpd], weights: &[f64]) -> Option<Self> {
        let first = tables.first()?;
        let mut values = vec![0.0; first.values.len()];
        for (t, w) in tables.iter().zip(weights) {
            if t.values.len() != values.len() {
                return None;
            }
            for (acc, v) in values.iter_mut().zip(&t.values) {
                *acc += w * v;
            }
        }
        Some(TabularCpd {
            values,
            ..(*first).clone()
        })
    }
}

/// A decision rule: a CPD attached to a decision variable.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DecisionRule(TabularCpd);

impl DecisionRule {
    pub fn new(cpd: TabularCpd) -> Self {
        DecisionRule(cpd)
    }

    /// Pure rule choosing `actions[c]` in the `c`-th decision context.
    pub fn pure(
        decision: &str,
        card: usize,
        parents: Vec<String>,
        parent_cards: Vec<usize>,
        actions: &[usize],
    ) -> Self {
        let mut cpd = TabularCpd::delta(decision, card, parents, parent_cards, 0);
        for (ctx, &a) in actions.iter().enumerate() {
            let row = cpd.row_mut(ctx);
            row.fill(0.0);
            row[a] = 1.0;
        }
        DecisionRule(cpd)
    }

    pub fn cpd(&self) -> &TabularCpd {
        &self.0
    }

    pub fn into_cpd(self) -> TabularCpd {
        self.0
    }

    /// For a pure rule, the chosen action in each context.
    pub fn actions(&self) -> Option<Vec<usize>> {
        self.0
            .rows()
            .map(|row| {
                if row.iter().all(|p| *p == 0.0 || *p == 1.0) {
                    row.iter().position(|p| *p == 1.0)
                } else {
                    None
                }
            })
            .collect()
    }
}

impl Deref for DecisionRule {
    type Target = TabularCpd;

    fn deref(&self) -> &TabularCpd {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_parent() -> TabularCpd {
        TabularCpd::new(
            "Y",
            2,
            vec!["A".into(), "B".into()],
            vec![2, 3],
            vec![
                vec![0.1, 0.9],
                vec![0.2, 0.8],
                vec![0.3, 0.7],
                vec![0.4, 0.6],
                vec![0.5, 0.5],
                vec![0.6, 0.4],
            ],
        )
        .unwrap()
    }

    #[test]
    fn row_layout_is_first_parent_major() {
        let t = two_parent();
        assert_eq!(t.row_index(&[1, 0]), 3);
        assert_eq!(t.prob(0, &[0, 2]), 0.3);
    }

    #[test]
    fn shape_errors() {
        let err = TabularCpd::new("Y", 2, vec!["A".into()], vec![2], vec![vec![0.5, 0.5]]);
        assert!(matches!(err, Err(Error::Shape { .. })));
    }

    #[test]
    fn row_sum_violations_are_reported() {
        let t = TabularCpd::new("Y", 2, vec![], vec![], vec![vec![0.5, 0.4]]).unwrap();
        assert_eq!(t.bad_rows(1e-9), vec![0]);
    }

    #[test]
    fn appended_parent_is_ignored_and_droppable() {
        let t = two_parent();
        let ext = t.with_parent_appended("C", 2);
        assert!(!ext.depends_on("C", 0.0));
        assert!(ext.depends_on("A", 0.0));
        assert_eq!(ext.drop_parent("C", 0.0).unwrap(), t);
        assert!(ext.drop_parent("A", 0.0).is_none());
    }

    #[test]
    fn reordering_preserves_the_function() {
        let t = two_parent();
        let r = t.reordered(&["B".into(), "A".into()]).unwrap();
        assert_eq!(r.prob(0, &[2, 1]), t.prob(0, &[1, 2]));
        assert!(t.approx_eq(&r, 0.0));
    }

    #[test]
    fn marginalisation_mixes_rows() {
        let t = two_parent();
        let m = t.marginalize_parent("A", |_| Ok(vec![0.5, 0.5])).unwrap();
        assert_eq!(m.parents(), ["B".to_string()]);
        assert!((m.prob(0, &[0]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pure_rule_flags() {
        let r = DecisionRule::pure("D", 2, vec!["T".into()], vec![2], &[1, 0]);
        assert!(r.is_pure());
        assert!(!r.is_fully_stochastic());
        assert_eq!(r.actions(), Some(vec![1, 0]));
    }
}
