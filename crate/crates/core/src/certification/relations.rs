//! Bounded integer-relation search.

use serde::{Deserialize, Serialize};

/// Above this many candidate evaluations the exhaustive search hands over to
/// lattice reduction.
pub const EXHAUSTIVE_BUDGET: f64 = 2e8;
/// Largest vector length searched exhaustively.
pub const EXHAUSTIVE_MAX_LEN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationStatus {
    RelationFound,
    NoneFoundWithinBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    Exhaustive,
    Lattice,
}

/// Outcome of [`nonresonance`]. A missing relation is never a proof of
/// independence: it only says nothing was found with `|q_i| <= search_bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationVerdict {
    pub status: RelationStatus,
    pub relation: Option<Vec<i64>>,
    /// `|sum q_i g_i|` for the reported relation.
    pub residual: Option<f64>,
    /// `tol * |g|_2 * |q|_2` for the reported relation.
    pub threshold: Option<f64>,
    pub search_bound: u64,
    pub tolerance: f64,
    pub method: SearchMethod,
}

impl RelationVerdict {
    pub fn found(&self) -> bool {
        self.status == RelationStatus::RelationFound
    }

    /// Recomputes the acceptance inequality from the stored fields.
    pub fn is_self_consistent(&self, values: &[f64]) -> bool {
        match &self.relation {
            None => self.status == RelationStatus::NoneFoundWithinBounds,
            Some(q) => {
                let (res, thr) = relation_residual(values, q, self.tolerance);
                q.iter().any(|&x| x != 0)
                    && q.iter().all(|&x| x.unsigned_abs() <= self.search_bound)
                    && res <= thr
            }
        }
    }
}

/// `(|sum q_i g_i|, tol * |g|_2 * |q|_2)`.
pub fn relation_residual(values: &[f64], q: &[i64], tol: f64) -> (f64, f64) {
    let g_norm = values.iter().map(|g| g * g).sum::<f64>().sqrt();
    let q_norm = q.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let sum: f64 = values.iter().zip(q).map(|(g, &x)| g * x as f64).sum();
    (sum.abs(), tol * g_norm * q_norm)
}

/// Searches integer vectors `q != 0`, `|q|_inf <= bound`, with
/// `|sum q_i g_i| <= tol |g|_2 |q|_2`.
///
/// The search runs over prefixes: the first prefix length `m'` that admits a
/// relation supported on `g_1..g_m'` with `q_m' != 0` wins, and within it the
/// smallest `|q|_inf`, then `|q|_1`, then lexicographic order is reported,
/// with the first nonzero entry positive. Up to six values are searched
/// exhaustively when affordable; otherwise LLL reduction proposes candidates.
pub fn nonresonance(values: &[f64], bound: u64, tol: f64) -> RelationVerdict {
    let bound = bound.max(1);
    let m = values.len();
    let side = 2.0 * bound as f64 + 1.0;
    let cost: f64 = (1..=m).map(|p| side.powi(p as i32 - 1)).sum();
    let (relation, method) = if m <= EXHAUSTIVE_MAX_LEN && cost <= EXHAUSTIVE_BUDGET {
        (
            exhaustive(values, bound as i64, tol),
            SearchMethod::Exhaustive,
        )
    } else {
        (lattice(values, bound as i64, tol), SearchMethod::Lattice)
    };
    match relation {
        Some(q) => {
            let (res, thr) = relation_residual(values, &q, tol);
            RelationVerdict {
                status: RelationStatus::RelationFound,
                relation: Some(q),
                residual: Some(res),
                threshold: Some(thr),
                search_bound: bound,
                tolerance: tol,
                method,
            }
        }
        None => RelationVerdict {
            status: RelationStatus::NoneFoundWithinBounds,
            relation: None,
            residual: None,
            threshold: None,
            search_bound: bound,
            tolerance: tol,
            method,
        },
    }
}

fn canonical(mut q: Vec<i64>) -> Vec<i64> {
    if let Some(&first) = q.iter().find(|&&x| x != 0) {
        if first < 0 {
            q.iter_mut().for_each(|x| *x = -*x);
        }
    }
    q
}

fn ranking(q: &[i64]) -> (u64, u64, Vec<i64>) {
    let inf = q.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
    let one = q.iter().map(|x| x.unsigned_abs()).sum();
    (inf, one, q.to_vec())
}

fn keep_best(best: &mut Option<Vec<i64>>, q: Vec<i64>) {
    let q = canonical(q);
    let better = match best {
        None => true,
        Some(b) => ranking(&q) < ranking(b),
    };
    if better {
        *best = Some(q);
    }
}

fn exhaustive(values: &[f64], bound: i64, tol: f64) -> Option<Vec<i64>> {
    let m = values.len();
    let g_norm = values.iter().map(|g| g * g).sum::<f64>().sqrt();
    for p in 1..=m {
        let last = values[p - 1];
        let mut best: Option<Vec<i64>> = None;
        let free = p - 1;
        let mut q = vec![-bound; free];
        if free == 0 {
            q.clear();
        }
        loop {
            let s: f64 = q.iter().zip(values).map(|(&x, g)| x as f64 * g).sum();
            let sq: f64 = q.iter().map(|&x| (x * x) as f64).sum();
            let mut candidates = [0i64; 2];
            if last == 0.0 {
                candidates = [1, 1];
            } else {
                let r = -s / last;
                if r.abs() <= bound as f64 + 1.0 {
                    candidates = [r.floor() as i64, r.ceil() as i64];
                }
            }
            for &c in &candidates {
                if c == 0 || c.abs() > bound {
                    continue;
                }
                let res = (s + c as f64 * last).abs();
                let q_norm = (sq + (c * c) as f64).sqrt();
                if res <= tol * g_norm * q_norm {
                    let mut full = q.clone();
                    full.push(c);
                    full.resize(m, 0);
                    keep_best(&mut best, full);
                }
            }
            // odometer over the free coordinates
            let mut i = 0;
            while i < free {
                if q[i] < bound {
                    q[i] += 1;
                    break;
                }
                q[i] = -bound;
                i += 1;
            }
            if i == free {
                break;
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

/// LLL on the rows `(e_i, C g_i / |g|)`; short reduced vectors carry
/// candidate relations in their first `m` coordinates.
fn lattice(values: &[f64], bound: i64, tol: f64) -> Option<Vec<i64>> {
    let m = values.len();
    if m == 0 {
        return None;
    }
    let g_norm = values.iter().map(|g| g * g).sum::<f64>().sqrt();
    if g_norm == 0.0 {
        let mut q = vec![0; m];
        q[0] = 1;
        return Some(q);
    }
    let weight = 1.0 / tol.max(1e-15);
    let mut basis: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; m + 1];
            row[i] = 1.0;
            row[m] = weight * values[i] / g_norm;
            row
        })
        .collect();
    lll_reduce(&mut basis, 0.75);

    // the reduced basis is searched prefix by prefix like the exhaustive path
    let mut by_prefix: Vec<Option<Vec<i64>>> = vec![None; m];
    let mut consider = |q: Vec<i64>| {
        if q.iter().all(|&x| x == 0) || q.iter().any(|x| x.abs() > bound) {
            return;
        }
        let (res, thr) = relation_residual(values, &q, tol);
        if res <= thr {
            let p = q.iter().rposition(|&x| x != 0).unwrap();
            keep_best(&mut by_prefix[p], q);
        }
    };
    for row in &basis {
        consider(row[..m].iter().map(|x| x.round() as i64).collect());
    }
    // pairwise sums and differences catch relations split across two rows
    for a in 0..basis.len() {
        for b in (a + 1)..basis.len() {
            for sign in [1.0, -1.0] {
                consider(
                    (0..m)
                        .map(|i| (basis[a][i] + sign * basis[b][i]).round() as i64)
                        .collect(),
                );
            }
        }
    }
    by_prefix.into_iter().flatten().next()
}

fn gram_schmidt(basis: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let k = basis.len();
    let mut star: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut mu = vec![vec![0.0; k]; k];
    let mut norms = vec![0.0; k];
    for i in 0..k {
        let mut v = basis[i].clone();
        for j in 0..i {
            if norms[j] == 0.0 {
                continue;
            }
            let c = dot(&basis[i], &star[j]) / norms[j];
            mu[i][j] = c;
            for (x, s) in v.iter_mut().zip(&star[j]) {
                *x -= c * s;
            }
        }
        norms[i] = dot(&v, &v);
        star.push(v);
    }
    (star, mu, norms)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Textbook LLL with Gram–Schmidt recomputed after every change; sizes here
/// are small.
pub fn lll_reduce(basis: &mut [Vec<f64>], delta: f64) {
    let n = basis.len();
    if n < 2 {
        return;
    }
    let mut k = 1;
    let mut iterations = 0usize;
    while k < n && iterations < 100_000 {
        iterations += 1;
        for j in (0..k).rev() {
            let (_, mu, _) = gram_schmidt(basis);
            let c = mu[k][j].round();
            if c != 0.0 {
                let row_j = basis[j].clone();
                for (x, y) in basis[k].iter_mut().zip(&row_j) {
                    *x -= c * y;
                }
            }
        }
        let (_, mu, norms) = gram_schmidt(basis);
        if norms[k] >= (delta - mu[k][k - 1].powi(2)) * norms[k - 1] {
            k += 1;
        } else {
            basis.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
}
