//! Hypothesis checks for approximate controllability at a truncation order,
//! with explicit evidence and bounded verdicts.

pub mod relations;

use std::collections::VecDeque;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{commutator, max_norm, CMatrix, SkewHermitianMatrix};
use crate::models::{truncate, DiscreteSpectrumSystem, GalerkinPair};
pub use relations::{
    nonresonance, relation_residual, RelationStatus, RelationVerdict, SearchMethod,
};

/// Entries with magnitude above this count as graph edges.
pub const EDGE_TOL: f64 = 1e-12;
/// Relative residual below which a bracket is already in the span.
pub const LIE_SPAN_TOL: f64 = 1e-9;
/// Squared gaps closer than this (relative to the largest) are one node.
pub const NODE_COLLISION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connectivity {
    pub connected: bool,
    /// An invariant index set (0-based): the smallest component, ties going
    /// to the component holding the lowest index. Empty when connected.
    pub partition: Vec<usize>,
    pub components: Vec<Vec<usize>>,
}

pub fn connectedness(w: &DMatrix<f64>) -> Connectivity {
    connectedness_with_tol(w, EDGE_TOL)
}

pub fn connectedness_with_tol(w: &DMatrix<f64>, tol: f64) -> Connectivity {
    components_by(w.nrows(), |j, k| w[(j, k)].abs().max(w[(k, j)].abs()) > tol)
}

/// Same as [`connectedness`] for a complex coupling such as `B`.
pub fn connectedness_skew(b: &SkewHermitianMatrix, tol: f64) -> Connectivity {
    let m = b.matrix();
    components_by(m.nrows(), |j, k| m[(j, k)].norm() > tol)
}

fn components_by(n: usize, edge: impl Fn(usize, usize) -> bool) -> Connectivity {
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(j) = queue.pop_front() {
            for k in 0..n {
                if !seen[k] && edge(j, k) {
                    seen[k] = true;
                    comp.push(k);
                    queue.push_back(k);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    let connected = components.len() <= 1;
    let partition = if connected {
        Vec::new()
    } else {
        // components are discovered in order of their lowest index
        components
            .iter()
            .min_by_key(|c| c.len())
            .cloned()
            .unwrap_or_default()
    };
    Connectivity {
        connected,
        partition,
        components,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentConnectivity {
    /// True when some stored order `k >= n` has a connected `W^(k)`. The
    /// infinite quantifier over all orders cannot be decided from finite data.
    pub holds_up_to_data: bool,
    pub first_connected_order: Option<usize>,
    pub levels_checked: usize,
}

pub fn frequently_connected(sys: &DiscreteSpectrumSystem, n: usize) -> FrequentConnectivity {
    let w = sys.coupling();
    let first = (n.max(1)..=sys.levels())
        .find(|&k| connectedness(&w.view((0, 0), (k, k)).into_owned()).connected);
    FrequentConnectivity {
        holds_up_to_data: first.is_some(),
        first_connected_order: first,
        levels_checked: sys.levels(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDistinctness {
    pub ok: bool,
    /// Pairs of index pairs `((j,k),(l,m))` whose gaps coincide.
    pub violations: Vec<((usize, usize), (usize, usize))>,
    pub tolerance: f64,
}

/// Checks `| |l_j - l_k| - |l_l - l_m| | > tol * max(1, spread)` over all
/// distinct unordered pairs.
pub fn pairwise_gap_distinct(lambda: &[f64], tol: f64) -> GapDistinctness {
    let n = lambda.len();
    let lo = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambda.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = tol * (hi - lo).max(1.0);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| ((j + 1)..n).map(move |k| (j, k)))
        .collect();
    let gap = |(j, k): (usize, usize)| (lambda[j] - lambda[k]).abs();
    let mut violations = Vec::new();
    for (a, &p) in pairs.iter().enumerate() {
        for &q in &pairs[a + 1..] {
            if (gap(p) - gap(q)).abs() <= scale {
                violations.push((p, q));
            }
        }
    }
    GapDistinctness {
        ok: violations.is_empty(),
        violations,
        tolerance: tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LieRank {
    pub rank: usize,
    pub contains_sun: bool,
    /// False when `max_depth` ran out first; `rank` is then a lower bound.
    pub stabilized: bool,
    pub depth: usize,
}

/// Real dimension of the Lie algebra generated by `A` and `B`.
///
/// Breadth-first: each round brackets the newly accepted directions with `A`
/// and `B`, and keeps what is not already in the span (Gram–Schmidt with
/// re-orthogonalization in real coordinates of u(n)).
pub fn lie_rank(g: &GalerkinPair, max_depth: usize) -> LieRank {
    lie_rank_of(g.a(), g.b(), max_depth).expect("pair has matching dimensions")
}

/// [`lie_rank`] for any two skew-Hermitian matrices of equal size.
pub fn lie_rank_of(
    a: &SkewHermitianMatrix,
    b: &SkewHermitianMatrix,
    max_depth: usize,
) -> Result<LieRank> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let n = a.dim();
    let full = n * n;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut frontier = Vec::new();
    for x in [a, b] {
        if let Some(dir) = absorb(&mut basis, x, 0.0) {
            frontier.push(dir);
        }
    }
    let mut depth = 0;
    let mut stabilized = frontier.is_empty() || basis.len() == full;
    while !stabilized && depth < max_depth {
        depth += 1;
        let mut next = Vec::new();
        for f in &frontier {
            for gen in [a, b] {
                let bracket = commutator(gen, f).expect("dimensions agree");
                // frontier entries are unit vectors, so 2|gen| bounds the bracket
                if let Some(dir) = absorb(&mut basis, &bracket, 2.0 * gen.frobenius_norm()) {
                    next.push(dir);
                }
            }
        }
        frontier = next;
        stabilized = frontier.is_empty() || basis.len() == full;
    }
    let rank = basis.len();
    Ok(LieRank {
        rank,
        contains_sun: rank + 1 >= full,
        stabilized,
        depth,
    })
}

/// Adds `x` to an orthonormal basis if it has a significant residual and
/// returns the normalized residual as a matrix. `scale` is the size the
/// candidate would have without cancellation; residuals at roundoff level
/// relative to it are rejected.
fn absorb(
    basis: &mut Vec<Vec<f64>>,
    x: &SkewHermitianMatrix,
    scale: f64,
) -> Option<SkewHermitianMatrix> {
    let n = x.dim();
    if basis.len() == n * n {
        return None;
    }
    let mut v = x.real_coordinates();
    let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis.iter() {
            let c: f64 = b.iter().zip(&v).map(|(p, q)| p * q).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
    }
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm <= LIE_SPAN_TOL * norm0.max(scale) {
        return None;
    }
    v.iter_mut().for_each(|a| *a /= norm);
    let m = SkewHermitianMatrix::from_real_coordinates(n, &v).expect("length n^2");
    basis.push(v);
    Some(m)
}

/// Lagrange basis polynomial for `nodes[target]`, as monomial coefficients
/// (constant term first).
pub fn lagrange_basis(nodes: &[f64], target: usize) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    let xt = nodes[target];
    for (r, &xr) in nodes.iter().enumerate() {
        if r == target {
            continue;
        }
        let d = xt - xr;
        let mut next = vec![0.0; coeffs.len() + 1];
        for (h, c) in coeffs.iter().enumerate() {
            next[h + 1] += c / d;
            next[h] -= c * xr / d;
        }
        coeffs = next;
    }
    coeffs
}

/// The matrices of the constructive su(n) argument for one pair `(j, k)`.
#[derive(Debug, Clone)]
pub struct Generators {
    /// `b_jk e_jk - conj(b_jk) e_kj`, built as `P(-ad_A^2) B`.
    pub n: SkewHermitianMatrix,
    /// Recovers `e_jk - e_kj`.
    pub e: SkewHermitianMatrix,
    /// Recovers `i (e_jk + e_kj)`.
    pub f: SkewHermitianMatrix,
    /// Interpolation nodes: `0` plus the distinct squared gaps.
    pub nodes: Vec<f64>,
    /// Monomial coefficients `c_h` of `P` in the squared-gap variable, so that
    /// `N = sum_h c_h (-1)^h ad_A^{2h} B`.
    pub coefficients: Vec<f64>,
    pub residual_n: f64,
    pub residual_e: f64,
    pub residual_f: f64,
}

impl Generators {
    pub fn max_residual(&self) -> f64 {
        self.residual_n.max(self.residual_e).max(self.residual_f)
    }
}

/// Builds `N_jk` by applying the interpolation polynomial of `-ad_A^2` to
/// `B`, then `E_jk`, `F_jk` from `N_jk` and `[A, N_jk]`.
///
/// `-ad_A^2` multiplies entry `(l, m)` by `(l_l - l_m)^2`, so the polynomial
/// equal to 1 on the target squared gap and 0 on every other squared gap
/// (including 0, the diagonal) isolates the `(j, k)` entries. It is applied
/// factor by factor, which stays accurate where the monomial sum does not.
pub fn constructive_generators(g: &GalerkinPair, j: usize, k: usize) -> Result<Generators> {
    let n = g.order();
    if j >= n || k >= n || j == k {
        return Err(Error::InvalidParameter(format!(
            "generator pair ({j}, {k}) must be two distinct indices below {n}"
        )));
    }
    let beta = g.b().matrix()[(j, k)];
    if beta.norm() <= EDGE_TOL {
        return Err(Error::ZeroCoupling(j, k));
    }
    let lambda = g.lambda();
    let sq = |l: usize, m: usize| (lambda[l] - lambda[m]).powi(2);
    let target = sq(j, k);
    let max_sq = (0..n)
        .flat_map(|l| (0..n).map(move |m| (l, m)))
        .map(|(l, m)| sq(l, m))
        .fold(0.0, f64::max);
    let merge_tol = NODE_COLLISION_TOL * max_sq.max(1.0);

    let mut colliding = Vec::new();
    for l in 0..n {
        for m in l..n {
            if (l, m) != (j.min(k), j.max(k)) && (sq(l, m) - target).abs() <= merge_tol {
                colliding.push((l, m));
            }
        }
    }
    if !colliding.is_empty() {
        return Err(Error::CollidingGaps {
            target: (j.min(k), j.max(k)),
            colliding,
        });
    }

    let mut nodes = vec![target, 0.0];
    for l in 0..n {
        for m in (l + 1)..n {
            let s = sq(l, m);
            if nodes.iter().all(|&x| (x - s).abs() > merge_tol) {
                nodes.push(s);
            }
        }
    }

    let a = g.a();
    let mut x = g.b().matrix().clone();
    // Far nodes first: their factors shrink most entries, while factors for
    // nodes near the target amplify and are best applied once few survive.
    let mut order: Vec<f64> = nodes[1..].to_vec();
    order.sort_by(|p, q| (target - q).abs().total_cmp(&(target - p).abs()));
    for &xr in &order {
        let inner = a.matrix() * &x - &x * a.matrix();
        let outer = a.matrix() * &inner - &inner * a.matrix();
        // -[A,[A,X]] - xr X
        x = (-outer - &x * Complex64::new(xr, 0.0)) / Complex64::new(target - xr, 0.0);
    }
    let n_mat = SkewHermitianMatrix::from_symmetrized(x);

    let coefficients = lagrange_basis(&nodes, 0);

    let gap = lambda[j] - lambda[k];
    let d_mat = commutator(a, &n_mat)?.scale(1.0 / gap);
    let (p, q) = (beta.re, beta.im);
    let b2 = beta.norm_sqr();
    let e = SkewHermitianMatrix::combine(p / b2, &n_mat, -q / b2, &d_mat)?;
    let f = SkewHermitianMatrix::combine(q / b2, &n_mat, p / b2, &d_mat)?;

    let mut n_exact = CMatrix::zeros(n, n);
    n_exact[(j, k)] = beta;
    n_exact[(k, j)] = -beta.conj();
    let residual_n = max_norm(&(n_mat.matrix() - n_exact));
    let residual_e = max_norm(&(e.matrix() - SkewHermitianMatrix::elementary_e(n, j, k).matrix()));
    let residual_f = max_norm(&(f.matrix() - SkewHermitianMatrix::elementary_f(n, j, k).matrix()));

    Ok(Generators {
        n: n_mat,
        e,
        f,
        nodes,
        coefficients,
        residual_n,
        residual_e,
        residual_f,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationStatus {
    /// No relation among the diagonal couplings within bounds and the system
    /// is frequently connected up to stored data.
    AlmostEveryMu,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationVerdict {
    pub status: PerturbationStatus,
    pub diagonal: Vec<f64>,
    pub relation: RelationVerdict,
    pub frequently_connected: FrequentConnectivity,
}

/// Runs the relation search on the first-order eigenvalue shifts `W[k][k]`
/// of `-Delta + mu W`.
pub fn perturbation_certificate(
    sys: &DiscreteSpectrumSystem,
    n: usize,
    bound: u64,
    tol: f64,
) -> Result<PerturbationVerdict> {
    check_order(sys, n)?;
    let diagonal: Vec<f64> = (0..n).map(|k| sys.coupling()[(k, k)]).collect();
    let relation = nonresonance(&diagonal, bound, tol);
    let fc = frequently_connected(sys, n);
    let status = if relation.found() {
        PerturbationStatus::Refuted
    } else if fc.holds_up_to_data {
        PerturbationStatus::AlmostEveryMu
    } else {
        PerturbationStatus::Inconclusive
    };
    Ok(PerturbationVerdict {
        status,
        diagonal,
        relation,
        frequently_connected: fc,
    })
}

fn check_order(sys: &DiscreteSpectrumSystem, n: usize) -> Result<()> {
    if n < 2 || n > sys.levels() {
        return Err(Error::OrderOutOfRange {
            order: n,
            min: 2,
            max: sys.levels(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Certified,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyOptions {
    /// Coefficient bound `Q` of the relation search.
    #[serde(rename = "Q")]
    pub q: u64,
    pub tol: f64,
    /// Defaults to `2 n^2` when absent.
    pub max_depth: Option<usize>,
    pub edge_tol: f64,
    pub gap_tol: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            q: 20,
            tol: 1e-9,
            max_depth: None,
            edge_tol: EDGE_TOL,
            gap_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorResidual {
    pub pair: (usize, usize),
    pub residual_n: f64,
    pub residual_e: f64,
    pub residual_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub order: usize,
    pub levels: usize,
    pub connectivity: Connectivity,
    pub frequently_connected: FrequentConnectivity,
    pub gaps: Vec<f64>,
    pub nonresonant_gaps: RelationVerdict,
    pub pairwise_gaps: GapDistinctness,
    pub lie_rank: LieRank,
    /// Residuals of the constructive generators for every coupled pair, when
    /// the pairwise gaps are distinct.
    pub generators: Vec<GeneratorResidual>,
    pub perturbation: PerturbationVerdict,
    pub overall: Overall,
    pub witness: Option<String>,
}

/// All checks at order `n`. Refutation needs a concrete witness: a gap
/// relation, coinciding gaps, or an invariant index set that persists through
/// every stored order.
pub fn certify(
    sys: &DiscreteSpectrumSystem,
    n: usize,
    options: &CertifyOptions,
) -> Result<CertificationReport> {
    check_order(sys, n)?;
    let pair = truncate(sys, n)?;
    let lambda = &sys.lambda()[..n];
    let gaps: Vec<f64> = lambda.windows(2).map(|w| w[1] - w[0]).collect();
    let max_depth = options.max_depth.unwrap_or(2 * n * n);

    let (lie, (verdict, perturbation)) = rayon::join(
        || lie_rank(&pair, max_depth),
        || {
            let verdict = nonresonance(&gaps, options.q, options.tol);
            let pert = perturbation_certificate(sys, n, options.q, options.tol);
            (verdict, pert)
        },
    );
    let perturbation = perturbation?;

    let connectivity = connectedness_with_tol(pair.coupling(), options.edge_tol);
    let frequently = frequently_connected(sys, n);
    let pairwise = pairwise_gap_distinct(lambda, options.gap_tol);

    let mut generators = Vec::new();
    if pairwise.ok {
        for j in 0..n {
            for k in (j + 1)..n {
                if let Ok(gen) = constructive_generators(&pair, j, k) {
                    generators.push(GeneratorResidual {
                        pair: (j, k),
                        residual_n: gen.residual_n,
                        residual_e: gen.residual_e,
                        residual_f: gen.residual_f,
                    });
                }
            }
        }
    }

    let (overall, witness) = if let Some(q) = &verdict.relation {
        (
            Overall::Refuted,
            Some(format!("integer relation {q:?} among consecutive gaps")),
        )
    } else if !pairwise.ok {
        let (p, q) = pairwise.violations[0];
        (
            Overall::Refuted,
            Some(format!(
                "gap of pair {p:?} coincides with gap of pair {q:?}"
            )),
        )
    } else if !connectivity.connected && !frequently.holds_up_to_data {
        (
            Overall::Refuted,
            Some(format!(
                "index set {:?} is invariant at every stored order up to {}",
                connectivity.partition,
                sys.levels()
            )),
        )
    } else if connectivity.connected && lie.contains_sun {
        (Overall::Certified, None)
    } else {
        (Overall::Inconclusive, None)
    };

    Ok(CertificationReport {
        order: n,
        levels: sys.levels(),
        connectivity,
        frequently_connected: frequently,
        gaps,
        nonresonant_gaps: verdict,
        pairwise_gaps: pairwise,
        lie_rank: lie,
        generators,
        perturbation,
        overall,
        witness,
    })
}
