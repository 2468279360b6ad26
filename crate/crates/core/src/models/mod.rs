//! Discrete-spectrum control systems: eigenvalues of the drift plus the real
//! symmetric coupling matrix `W[j][k] = <W phi_j, phi_k>` of the control
//! potential.
//!
//! Two closed models are built in (the harmonic oscillator with a Gaussian
//! control potential and the 3D box with an exponential one); anything else is
//! ingested through [`custom_system`]. Couplings stay real; the skew-Hermitian
//! control operator `B = -iW` is only formed at truncation.

pub mod quadrature;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SkewHermitianMatrix;
use quadrature::{orthonormal_hermite, GaussHermite};

/// Relative tolerance under which two box eigenvalues count as colliding.
pub const DEGENERACY_REL_TOL: f64 = 1e-9;
/// Node-doubling stability threshold for oscillator couplings.
pub const QUADRATURE_TOL: f64 = 1e-10;
const MAX_QUADRATURE_NODES: usize = 4096;

/// How the constant `c` of `W(x) = e^{ax^2 + bx + c}` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffsetMode {
    Explicit(f64),
    /// `c = b^2 / (4(a - 1))`, which makes the completed square exact.
    Normalized,
}

impl OffsetMode {
    pub fn resolve(self, a: f64, b: f64) -> f64 {
        match self {
            OffsetMode::Explicit(c) => c,
            OffsetMode::Normalized => b * b / (4.0 * (a - 1.0)),
        }
    }
}

impl Serialize for OffsetMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            OffsetMode::Explicit(c) => s.serialize_f64(*c),
            OffsetMode::Normalized => s.serialize_str("normalized"),
        }
    }
}

impl<'de> Deserialize<'de> for OffsetMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Value(f64),
            Keyword(String),
        }
        match Repr::deserialize(d)? {
            Repr::Value(c) => Ok(OffsetMode::Explicit(c)),
            Repr::Keyword(k) if k == "normalized" => Ok(OffsetMode::Normalized),
            Repr::Keyword(k) => Err(serde::de::Error::custom(format!(
                "expected a number or \"normalized\", got \"{k}\""
            ))),
        }
    }
}

/// Whether the 3D box rejects numerically degenerate kept levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    #[default]
    AllowDegenerate,
    SimpleSpectrum,
}

/// Provenance recorded alongside a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelMeta {
    Oscillator {
        a: f64,
        b: f64,
        c: f64,
        c_mode: OffsetMode,
        quadrature_nodes: usize,
    },
    Box3d {
        l: [f64; 3],
        alpha: [f64; 3],
    },
    Custom {},
}

/// A model recipe, as accepted by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Oscillator {
        a: f64,
        b: f64,
        c: OffsetMode,
        levels: usize,
    },
    Box3d {
        l: [f64; 3],
        alpha: [f64; 3],
        levels: usize,
        #[serde(default)]
        spectrum: SpectrumMode,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<DiscreteSpectrumSystem> {
        match *self {
            ModelSpec::Oscillator { a, b, c, levels } => oscillator_system(a, b, c, levels),
            ModelSpec::Box3d {
                l,
                alpha,
                levels,
                spectrum,
            } => box3d_system(l, alpha, levels, spectrum),
        }
    }
}

/// Eigenvalues (sorted) plus real symmetric couplings of a control potential.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpectrumSystem {
    lambda: Vec<f64>,
    coupling: DMatrix<f64>,
    labels: Option<Vec<Vec<u32>>>,
    meta: ModelMeta,
}

impl DiscreteSpectrumSystem {
    pub fn levels(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// The full stored coupling matrix `W`.
    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn labels(&self) -> Option<&[Vec<u32>]> {
        self.labels.as_deref()
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    /// Euclidean norm of column `k` of the stored `W`; the stored-data
    /// surrogate for `|B phi_k|`.
    pub fn column_norm(&self, k: usize) -> f64 {
        self.coupling.column(k).norm()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.levels()).map(|k| self.column_norm(k)).collect()
    }

    pub fn truncate(&self, n: usize) -> Result<GalerkinPair> {
        truncate(self, n)
    }

    pub fn to_document(&self) -> SystemDocument {
        SystemDocument {
            levels: self.levels(),
            lambda: self.lambda.clone(),
            w: (0..self.levels())
                .map(|j| self.coupling.row(j).iter().cloned().collect())
                .collect(),
            labels: self.labels.clone(),
            meta: Some(self.meta.clone()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SystemDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    /// Validates a serialized system through the same path as
    /// [`custom_system`], keeping labels and provenance.
    pub fn from_document(doc: SystemDocument) -> Result<Self> {
        let l = doc.lambda.len();
        if doc.levels != l {
            return Err(Error::InvalidParameter(format!(
                "levels = {} but lambda has {} entries",
                doc.levels, l
            )));
        }
        if doc.w.len() != l || doc.w.iter().any(|row| row.len() != l) {
            return Err(Error::InvalidParameter(format!("W must be {l}x{l}")));
        }
        if let Some(labels) = &doc.labels {
            if labels.len() != l {
                return Err(Error::InvalidParameter(format!(
                    "labels has {} entries, expected {l}",
                    labels.len()
                )));
            }
        }
        let w = DMatrix::from_fn(l, l, |j, k| doc.w[j][k]);
        let mut sys = build_validated(doc.lambda, w, doc.labels)?;
        sys.meta = doc.meta.unwrap_or(ModelMeta::Custom {});
        Ok(sys)
    }
}

/// JSON layout of a system. `W` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub levels: usize,
    pub lambda: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<ModelMeta>,
}

/// Order-`n` truncation: `A = diag(i lambda)`, `B = -i W^(n)`.
#[derive(Debug, Clone)]
pub struct GalerkinPair {
    lambda: Vec<f64>,
    coupling: DMatrix<f64>,
    a: SkewHermitianMatrix,
    b: SkewHermitianMatrix,
}

impl GalerkinPair {
    /// Builds a pair directly from eigenvalues and a real symmetric coupling
    /// block.
    pub fn new(lambda: Vec<f64>, coupling: DMatrix<f64>) -> Result<Self> {
        let n = lambda.len();
        if coupling.nrows() != n || coupling.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: coupling.nrows(),
            });
        }
        let a = SkewHermitianMatrix::imaginary_diagonal(&lambda);
        let b = SkewHermitianMatrix::from_real_symmetric(&coupling)?;
        Ok(Self {
            lambda,
            coupling,
            a,
            b,
        })
    }

    pub fn order(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn a(&self) -> &SkewHermitianMatrix {
        &self.a
    }

    pub fn b(&self) -> &SkewHermitianMatrix {
        &self.b
    }

    /// Column norms of the truncated coupling block.
    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.order())
            .map(|k| self.coupling.column(k).norm())
            .collect()
    }
}

pub fn truncate(sys: &DiscreteSpectrumSystem, n: usize) -> Result<GalerkinPair> {
    if n < 2 || n > sys.levels() {
        return Err(Error::OrderOutOfRange {
            order: n,
            min: 2,
            max: sys.levels(),
        });
    }
    GalerkinPair::new(
        sys.lambda[..n].to_vec(),
        sys.coupling.view((0, 0), (n, n)).into_owned(),
    )
}

/// Result of [`tail_cutoff`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TailCutoff {
    pub order: usize,
    /// Set when the criterion only holds because the stored data ends at
    /// `order`; the true infinite tail is not known.
    pub data_boundary: bool,
}

/// Smallest `N` in `[n, levels]` with `sum_{k >= N} W[j][k]^2 < mu` for every
/// `j < n` (0-based, tail over stored columns).
pub fn tail_cutoff(sys: &DiscreteSpectrumSystem, n: usize, mu: f64) -> Result<TailCutoff> {
    let levels = sys.levels();
    if n == 0 || n > levels {
        return Err(Error::OrderOutOfRange {
            order: n,
            min: 1,
            max: levels,
        });
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive, got {mu}"
        )));
    }
    // tails[j] = sum over k >= cut of W[j][k]^2, updated as cut decreases
    let mut worst_tail_at = vec![0.0; levels + 1];
    let mut tails = vec![0.0; n];
    for cut in (n..levels).rev() {
        for (j, t) in tails.iter_mut().enumerate() {
            *t += sys.coupling[(j, cut)].powi(2);
        }
        worst_tail_at[cut] = tails.iter().cloned().fold(0.0, f64::max);
    }
    let order = (n..=levels)
        .find(|&cut| worst_tail_at[cut] < mu)
        .unwrap_or(levels);
    Ok(TailCutoff {
        order,
        data_boundary: order == levels,
    })
}

/// `lambda`/`W` ingestion: validates, symmetrizes and sorts levels.
pub fn custom_system(lambda: Vec<f64>, w: DMatrix<f64>) -> Result<DiscreteSpectrumSystem> {
    if w.nrows() != w.ncols() || w.nrows() != lambda.len() {
        return Err(Error::InvalidParameter(format!(
            "lambda has {} entries but W is {}x{}",
            lambda.len(),
            w.nrows(),
            w.ncols()
        )));
    }
    build_validated(lambda, w, None)
}

fn build_validated(
    lambda: Vec<f64>,
    w: DMatrix<f64>,
    labels: Option<Vec<Vec<u32>>>,
) -> Result<DiscreteSpectrumSystem> {
    let l = lambda.len();
    if l < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 levels, got {l}"
        )));
    }
    if lambda.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("lambda"));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("W"));
    }
    for j in 0..l {
        for k in (j + 1)..l {
            let error = (w[(j, k)] - w[(k, j)]).abs();
            if error > 1e-8 {
                return Err(Error::AsymmetricCoupling {
                    row: j,
                    col: k,
                    error,
                });
            }
        }
    }
    let sym = DMatrix::from_fn(l, l, |j, k| {
        if w[(j, k)] == w[(k, j)] {
            w[(j, k)]
        } else {
            0.5 * (w[(j, k)] + w[(k, j)])
        }
    });
    let mut perm: Vec<usize> = (0..l).collect();
    perm.sort_by(|&x, &y| lambda[x].partial_cmp(&lambda[y]).unwrap());
    let sorted_lambda = perm.iter().map(|&p| lambda[p]).collect();
    let sorted_w = DMatrix::from_fn(l, l, |j, k| sym[(perm[j], perm[k])]);
    let labels = labels.map(|ls| perm.iter().map(|&p| ls[p].clone()).collect());
    Ok(DiscreteSpectrumSystem {
        lambda: sorted_lambda,
        coupling: sorted_w,
        labels,
        meta: ModelMeta::Custom {},
    })
}

/// Harmonic oscillator `-d^2/dx^2 + x^2` with control potential
/// `W(x) = e^{ax^2 + bx + c}`, `a < 0`.
///
/// Eigenvalues are `2k + 1`. Couplings are integrated with Gauss–Hermite
/// quadrature in the variable `y = s x - b/(2s)`, `s = sqrt(1 - a)`, where the
/// integrand becomes `e^{-y^2}` times a polynomial; the node count is doubled
/// until no entry moves by more than [`QUADRATURE_TOL`] (relative to the
/// largest entry when that exceeds one).
pub fn oscillator_system(
    a: f64,
    b: f64,
    c: OffsetMode,
    levels: usize,
) -> Result<DiscreteSpectrumSystem> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("oscillator parameters"));
    }
    if a >= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "oscillator control potential needs a < 0, got a = {a}"
        )));
    }
    if levels < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 levels, got {levels}"
        )));
    }
    let c_value = c.resolve(a, b);
    if !c_value.is_finite() {
        return Err(Error::NonFinite("oscillator offset c"));
    }
    let s = (1.0 - a).sqrt();
    let prefactor = (c_value + b * b / (4.0 * s * s)).exp() / s;
    let shift = b / (2.0 * s);

    let integrate = |nodes: usize| -> DMatrix<f64> {
        let rule = GaussHermite::new(nodes);
        let mut acc = DMatrix::<f64>::zeros(levels, levels);
        for (&y, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let x = (y + shift) / s;
            let h = orthonormal_hermite(levels, x);
            for j in 0..levels {
                let hj = wt * h[j];
                for k in j..levels {
                    acc[(j, k)] += hj * h[k];
                }
            }
        }
        for j in 0..levels {
            for k in j..levels {
                let v = prefactor * acc[(j, k)];
                acc[(j, k)] = v;
                acc[(k, j)] = v;
            }
        }
        acc
    };

    let mut nodes = levels + 2;
    let mut current = integrate(nodes);
    loop {
        let doubled = nodes * 2;
        if doubled > MAX_QUADRATURE_NODES {
            let change = (&integrate(nodes) - &current).amax();
            return Err(Error::QuadratureNonConvergence { nodes, change });
        }
        let refined = integrate(doubled);
        let change = (&refined - &current).amax();
        let scale = refined.amax().max(1.0);
        if !change.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                nodes: doubled,
                change,
            });
        }
        nodes = doubled;
        current = refined;
        if change <= QUADRATURE_TOL * scale {
            break;
        }
    }

    let lambda = (0..levels).map(|k| 2.0 * k as f64 + 1.0).collect();
    Ok(DiscreteSpectrumSystem {
        lambda,
        coupling: current,
        labels: Some((0..levels as u32).map(|k| vec![k]).collect()),
        meta: ModelMeta::Oscillator {
            a,
            b,
            c: c_value,
            c_mode: c,
            quadrature_nodes: nodes,
        },
    })
}

/// `int_0^l e^{alpha x} cos(m pi x / l) dx` in closed form.
fn exp_cos_integral(m: i64, alpha: f64, l: f64) -> f64 {
    if m == 0 {
        if alpha == 0.0 {
            return l;
        }
        return (alpha * l).exp_m1() / alpha;
    }
    let omega = m as f64 * PI / l;
    let numer = if m % 2 == 0 {
        (alpha * l).exp_m1()
    } else {
        -((alpha * l).exp() + 1.0)
    };
    alpha * numer / (alpha * alpha + omega * omega)
}

/// `int_0^l e^{alpha x} (2/l) sin(k pi x/l) sin(h pi x/l) dx`, via
/// `sin A sin B = (cos(A-B) - cos(A+B))/2`.
pub fn box_coupling_1d(k: u32, h: u32, alpha: f64, l: f64) -> f64 {
    let (k, h) = (k as i64, h as i64);
    (exp_cos_integral(k - h, alpha, l) - exp_cos_integral(k + h, alpha, l)) / l
}

pub fn box_eigenvalue(l: [f64; 3], triple: [u32; 3]) -> f64 {
    PI * PI
        * triple
            .iter()
            .zip(l.iter())
            .map(|(&k, &li)| (k as f64 / li).powi(2))
            .sum::<f64>()
}

/// Dirichlet box `(0,l1)x(0,l2)x(0,l3)` with `W(x) = e^{alpha . x}`.
///
/// Levels are the lowest `levels` triples by eigenvalue, ties broken
/// lexicographically on the triple. Couplings are products of the three
/// closed-form 1D integrals.
pub fn box3d_system(
    l: [f64; 3],
    alpha: [f64; 3],
    levels: usize,
    mode: SpectrumMode,
) -> Result<DiscreteSpectrumSystem> {
    if l.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "box sides must be positive, got {l:?}"
        )));
    }
    if alpha.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("box alpha"));
    }
    if levels < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 levels, got {levels}"
        )));
    }

    let mut bound = box_eigenvalue(l, [1, 1, 1]);
    let mut triples = loop {
        let found = triples_below(l, bound);
        if found.len() >= levels {
            break found;
        }
        bound *= 1.5;
    };
    triples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    triples.truncate(levels);

    if mode == SpectrumMode::SimpleSpectrum {
        let collisions: Vec<_> = triples
            .windows(2)
            .filter(|w| {
                let (x, y) = (w[0].0, w[1].0);
                (y - x).abs() <= DEGENERACY_REL_TOL * x.abs().max(y.abs())
            })
            .map(|w| (w[0].1, w[1].1))
            .collect();
        if !collisions.is_empty() {
            return Err(Error::DegenerateSpectrum(collisions));
        }
    }

    let tables: Vec<DMatrix<f64>> = (0..3)
        .map(|axis| {
            let kmax = triples.iter().map(|t| t.1[axis]).max().unwrap_or(1);
            DMatrix::from_fn(kmax as usize, kmax as usize, |i, j| {
                box_coupling_1d(i as u32 + 1, j as u32 + 1, alpha[axis], l[axis])
            })
        })
        .collect();
    let coupling = DMatrix::from_fn(levels, levels, |p, q| {
        let (tp, tq) = (triples[p].1, triples[q].1);
        (0..3)
            .map(|axis| tables[axis][((tp[axis] - 1) as usize, (tq[axis] - 1) as usize)])
            .product()
    });

    Ok(DiscreteSpectrumSystem {
        lambda: triples.iter().map(|t| t.0).collect(),
        coupling,
        labels: Some(triples.iter().map(|t| t.1.to_vec()).collect()),
        meta: ModelMeta::Box3d { l, alpha },
    })
}

fn triples_below(l: [f64; 3], bound: f64) -> Vec<(f64, [u32; 3])> {
    let mut out = Vec::new();
    let mut k1 = 1;
    while box_eigenvalue(l, [k1, 1, 1]) <= bound {
        let mut k2 = 1;
        while box_eigenvalue(l, [k1, k2, 1]) <= bound {
            let mut k3 = 1;
            loop {
                let e = box_eigenvalue(l, [k1, k2, k3]);
                if e > bound {
                    break;
                }
                out.push((e, [k1, k2, k3]));
                k3 += 1;
            }
            k2 += 1;
        }
        k1 += 1;
    }
    out
}

/// Derivative at zero of the perturbed eigenvalue of level `(k1,k2,k3)`
/// under `-Delta + mu W`: the product of
/// `4 (e^{alpha l} - 1) k^2 pi^2 / (alpha l (4 pi^2 k^2 + alpha^2 l^2))`
/// over the three axes. Every `alpha_i` must be nonzero.
pub fn box3d_lambda_prime(l: [f64; 3], alpha: [f64; 3], triple: [u32; 3]) -> Result<f64> {
    if alpha.iter().any(|&a| a == 0.0) {
        return Err(Error::InvalidParameter(
            "box3d_lambda_prime needs every alpha_i nonzero".into(),
        ));
    }
    if l.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "box sides must be positive, got {l:?}"
        )));
    }
    let mut numer = 64.0 * PI.powi(6);
    let mut denom = 1.0;
    for i in 0..3 {
        let al = alpha[i] * l[i];
        let k2 = (triple[i] as f64).powi(2);
        numer *= al.exp_m1() * k2;
        denom *= al * (4.0 * PI * PI * k2 + al * al);
    }
    Ok(numer / denom)
}
