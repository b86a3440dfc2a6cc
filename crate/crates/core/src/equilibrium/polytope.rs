//! Bounded polytopes `{x : A x <= b, E x = f}` in a handful of dimensions,
//! with brute-force vertex enumeration.

use nalgebra::{DMatrix, DVector};

const TOL: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Polytope {
    pub dim: usize,
    pub ineqs: Vec<(Vec<f64>, f64)>,
    pub eqs: Vec<(Vec<f64>, f64)>,
}

impl Polytope {
    pub fn new(dim: usize) -> Self {
        Polytope {
            dim,
            ..Default::default()
        }
    }

    /// Adds `a . x <= b`. Constant constraints are kept so infeasibility is
    /// detected by `contains`.
    pub fn le(&mut self, a: Vec<f64>, b: f64) {
        self.ineqs.push((a, b));
    }

    pub fn ge(&mut self, a: Vec<f64>, b: f64) {
        self.le(a.iter().map(|v| -v).collect(), -b);
    }

    pub fn equal(&mut self, a: Vec<f64>, b: f64) {
        self.eqs.push((a, b));
    }

    /// `0 <= x_i <= 1` for every coordinate.
    pub fn unit_box(dim: usize) -> Self {
        let mut p = Polytope::new(dim);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            p.le(e.clone(), 1.0);
            p.ge(e, 0.0);
        }
        p
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.ineqs.iter().all(|(a, b)| dot(a, x) <= b + tol)
            && self.eqs.iter().all(|(a, b)| (dot(a, x) - b).abs() <= tol)
    }

    /// All vertices, deduplicated, in a deterministic order.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let Some(eqs) = self.independent_eqs() else {
            return Vec::new();
        };
        if self.dim == 0 {
            return if self.contains(&[], TOL) {
                vec![Vec::new()]
            } else {
                Vec::new()
            };
        }
        let need = self.dim.saturating_sub(eqs.len());
        let usable: Vec<&(Vec<f64>, f64)> = self
            .ineqs
            .iter()
            .filter(|(a, _)| a.iter().any(|v| v.abs() > TOL))
            .collect();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for subset in combinations(usable.len(), need) {
            let rows: Vec<&(Vec<f64>, f64)> = eqs.iter().copied().chain(subset.iter().map(|&i| usable[i])).collect();
            let m = DMatrix::from_fn(self.dim, self.dim, |r, c| rows[r].0[c]);
            let rhs = DVector::from_iterator(self.dim, rows.iter().map(|r| r.1));
            let lu = m.lu();
            if lu.determinant().abs() < 1e-12 {
                continue;
            }
            let Some(sol) = lu.solve(&rhs) else { continue };
            let x: Vec<f64> = sol.iter().map(|v| clean(*v)).collect();
            if self.contains(&x, 1e-8) && !out.iter().any(|y| close(y, &x)) {
                out.push(x);
            }
        }
        out.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        out
    }

    /// A maximal linearly independent subset of the equalities, or `None`
    /// when they are inconsistent.
    fn independent_eqs(&self) -> Option<Vec<&(Vec<f64>, f64)>> {
        let mut kept: Vec<&(Vec<f64>, f64)> = Vec::new();
        for e in &self.eqs {
            let mut trial = kept.clone();
            trial.push(e);
            if rank(&trial, self.dim, false) > kept.len() {
                kept = trial;
            } else if rank(&trial, self.dim, true) > rank(&kept, self.dim, true) {
                return None;
            }
        }
        Some(kept)
    }
}

fn rank(rows: &[&(Vec<f64>, f64)], dim: usize, augmented: bool) -> usize {
    let cols = dim + usize::from(augmented);
    if rows.is_empty() || cols == 0 {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), cols, |r, c| if c < dim { rows[r].0[c] } else { rows[r].1 });
    m.rank(1e-10)
}

fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(p, q)| p * q).sum()
}

fn clean(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-11 {
        r + 0.0
    } else {
        v
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}
