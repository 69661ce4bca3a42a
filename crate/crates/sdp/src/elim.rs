//! Elimination of affine equality constraints by sparse Gaussian elimination.

use std::collections::{BTreeMap, BTreeSet};

use crate::problem::LinExpr;

/// Parametrization `y = y0 + N z` of the solution set of the equalities.
#[derive(Debug)]
pub(crate) struct Reduction {
    pub y0: Vec<f64>,
    /// For each original variable, its dependence on the free variables.
    pub map: Vec<Vec<(usize, f64)>>,
    pub num_free: usize,
}

#[derive(Debug)]
pub(crate) struct Inconsistent {
    pub residual: f64,
}

const DROP_TOL: f64 = 1e-14;
const PIVOT_THRESHOLD: f64 = 0.5;

fn accumulate(into: &mut BTreeMap<usize, f64>, v: usize, c: f64) {
    let e = into.entry(v).or_insert(0.0);
    *e += c;
}

/// Eliminates `rows` (each meaning `row = 0`) over `n` variables.
///
/// Pivots use threshold partial pivoting that prefers the highest variable
/// index among candidates within a factor of the largest coefficient, which
/// keeps chain-structured equalities sparse.
pub(crate) fn eliminate(n: usize, rows: &[LinExpr], consistency_tol: f64) -> Result<Reduction, Inconsistent> {
    // Pivot expressions are kept fully reduced: they reference free vars only.
    let mut pivots: BTreeMap<usize, (BTreeMap<usize, f64>, f64)> = BTreeMap::new();
    let mut users: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();

    for row in rows {
        let scale = row.terms.iter().map(|t| t.1.abs()).fold(row.constant.abs(), f64::max).max(1.0);
        let mut coefs: BTreeMap<usize, f64> = BTreeMap::new();
        let mut constant = row.constant;
        for &(v, c) in &row.terms {
            if let Some((expr, k)) = pivots.get(&v) {
                constant += c * k;
                for (&u, &d) in expr {
                    accumulate(&mut coefs, u, c * d);
                }
            } else {
                accumulate(&mut coefs, v, c);
            }
        }
        let cmax = coefs.values().fold(0.0f64, |m, c| m.max(c.abs()));
        coefs.retain(|_, c| c.abs() > DROP_TOL * scale.max(cmax));
        if coefs.is_empty() {
            if constant.abs() > consistency_tol * scale {
                return Err(Inconsistent { residual: constant.abs() });
            }
            continue;
        }
        let cmax = coefs.values().fold(0.0f64, |m, c| m.max(c.abs()));
        let (&p, &a) = coefs
            .iter()
            .rev()
            .find(|(_, c)| c.abs() >= PIVOT_THRESHOLD * cmax)
            .expect("nonempty row has a pivot");
        let mut expr: BTreeMap<usize, f64> = BTreeMap::new();
        for (&v, &c) in &coefs {
            if v != p {
                expr.insert(v, -c / a);
            }
        }
        let k = -constant / a;

        // Substitute the new pivot into existing expressions that use it.
        if let Some(dependents) = users.remove(&p) {
            for q in dependents {
                let (qexpr, qk) = pivots.get_mut(&q).expect("dependent pivot exists");
                let Some(c) = qexpr.remove(&p) else { continue };
                *qk += c * k;
                for (&u, &d) in &expr {
                    accumulate(qexpr, u, c * d);
                    users.entry(u).or_default().insert(q);
                }
                qexpr.retain(|_, d| d.abs() > DROP_TOL);
            }
        }
        for &u in expr.keys() {
            users.entry(u).or_default().insert(p);
        }
        pivots.insert(p, (expr, k));
    }

    let mut free_index = vec![usize::MAX; n];
    let mut num_free = 0;
    for (v, slot) in free_index.iter_mut().enumerate() {
        if !pivots.contains_key(&v) {
            *slot = num_free;
            num_free += 1;
        }
    }
    let mut y0 = vec![0.0; n];
    let mut map = vec![Vec::new(); n];
    for v in 0..n {
        if let Some((expr, k)) = pivots.get(&v) {
            y0[v] = *k;
            map[v] = expr.iter().map(|(&u, &c)| (free_index[u], c)).collect();
        } else {
            map[v] = vec![(free_index[v], 1.0)];
        }
    }
    Ok(Reduction { y0, map, num_free })
}
