//! Complex matrix kernels on the Lie algebra u(n).
//!
//! Every propagator in this crate is the exponential of a skew-Hermitian
//! generator, so exponentials go through the Hermitian eigendecomposition of
//! `iM` instead of a general-purpose scaling-and-squaring routine. The result
//! is unitary to machine precision.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Maximum tolerated deviation from skew-Hermitian symmetry at construction.
pub const SKEW_SYMMETRY_TOL: f64 = 1e-8;
/// Maximum tolerated `|U^H U - I|_max` for a [`UnitaryMatrix`].
pub const UNITARITY_TOL: f64 = 1e-12;
/// Default relative singular-value cutoff for real-span ranks.
pub const RANK_TOL: f64 = 1e-10;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Entry-wise max norm of a complex matrix.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// A matrix `X` with `X^H = -X`, stored exactly symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewHermitianMatrix(CMatrix);

impl SkewHermitianMatrix {
    /// Symmetrizes `(X - X^H)/2` and rejects inputs that were not
    /// skew-Hermitian to within [`SKEW_SYMMETRY_TOL`].
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("skew-Hermitian matrix"));
        }
        let sym = symmetrize(&m);
        let error = max_norm(&(&m - &sym));
        if error > SKEW_SYMMETRY_TOL {
            return Err(Error::NotSkewHermitian {
                error,
                tolerance: SKEW_SYMMETRY_TOL,
            });
        }
        Ok(Self(sym))
    }

    /// Symmetrizes without the tolerance check. Used for results of exact
    /// algebraic operations (brackets, real combinations) on valid inputs.
    pub(crate) fn from_symmetrized(m: CMatrix) -> Self {
        Self(symmetrize(&m))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    /// `diag(i d_0, ..., i d_{n-1})`.
    pub fn imaginary_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = CMatrix::zeros(n, n);
        for (k, &v) in d.iter().enumerate() {
            m[(k, k)] = Complex64::new(0.0, v);
        }
        Self(m)
    }

    /// `-i W` for a real symmetric `W`.
    pub fn from_real_symmetric(w: &DMatrix<f64>) -> Result<Self> {
        Self::new(w.map(|x| Complex64::new(0.0, -x)))
    }

    /// The elementary generator `e_jk - e_kj`.
    pub fn elementary_e(dim: usize, j: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(j, k)] += Complex64::new(1.0, 0.0);
        m[(k, j)] -= Complex64::new(1.0, 0.0);
        Self(m)
    }

    /// The elementary generator `i (e_jk + e_kj)`.
    pub fn elementary_f(dim: usize, j: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(j, k)] += I;
        m[(k, j)] += I;
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * Complex64::new(s, 0.0))
    }

    /// `a X + b Y` for real `a`, `b`.
    pub fn combine(a: f64, x: &Self, b: f64, y: &Self) -> Result<Self> {
        check_dims(x.dim(), y.dim())?;
        Ok(Self(
            &x.0 * Complex64::new(a, 0.0) + &y.0 * Complex64::new(b, 0.0),
        ))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Coordinates in an orthonormal real basis of u(n), so that the
    /// Euclidean inner product equals the real Frobenius product.
    pub fn real_coordinates(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        let r2 = std::f64::consts::SQRT_2;
        for j in 0..n {
            out.push(self.0[(j, j)].im);
        }
        for j in 0..n {
            for k in (j + 1)..n {
                let z = self.0[(j, k)];
                out.push(r2 * z.re);
                out.push(r2 * z.im);
            }
        }
        out
    }

    /// Inverse of [`real_coordinates`](Self::real_coordinates).
    pub fn from_real_coordinates(n: usize, coords: &[f64]) -> Result<Self> {
        if coords.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: coords.len(),
            });
        }
        let mut m = CMatrix::zeros(n, n);
        for j in 0..n {
            m[(j, j)] = Complex64::new(0.0, coords[j]);
        }
        let r2 = std::f64::consts::SQRT_2;
        let mut idx = n;
        for j in 0..n {
            for k in (j + 1)..n {
                let z = Complex64::new(coords[idx], coords[idx + 1]) / r2;
                m[(j, k)] = z;
                m[(k, j)] = -z.conj();
                idx += 2;
            }
        }
        Ok(Self(m))
    }

    /// Spectral data of the Hermitian matrix `iM`, reusable for `e^{tM}` at
    /// many `t`.
    pub fn spectral(&self) -> Result<SkewSpectral> {
        SkewSpectral::new(self)
    }
}

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// A matrix with `U^H U = I` to within [`UNITARITY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, UNITARITY_TOL)
    }

    /// Like [`new`](Self::new) with a caller-chosen tolerance, for data read
    /// from text files.
    pub fn with_tolerance(m: CMatrix, tolerance: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let error = unitarity_error(&m);
        if !(error <= tolerance) {
            return Err(Error::NotUnitary { error, tolerance });
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `self * other`. The product of unitaries is unitary up to rounding,
    /// so no tolerance check is applied.
    pub fn compose(&self, other: &UnitaryMatrix) -> UnitaryMatrix {
        UnitaryMatrix(&self.0 * &other.0)
    }

    pub fn determinant(&self) -> Complex64 {
        self.0.clone().determinant()
    }
}

/// `|U^H U - I|_max`.
pub fn unitarity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_norm(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

/// Eigendecomposition `iM = V diag(d) V^H` of a skew-Hermitian `M`.
#[derive(Debug, Clone)]
pub struct SkewSpectral {
    vectors: CMatrix,
    values: DVector<f64>,
}

impl SkewSpectral {
    fn new(m: &SkewHermitianMatrix) -> Result<Self> {
        let n = m.dim();
        if n == 0 {
            return Ok(Self {
                vectors: CMatrix::zeros(0, 0),
                values: DVector::zeros(0),
            });
        }
        let h = m.matrix() * I;
        let norm = max_norm(&h);
        let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000 * n)
            .ok_or(Error::EigenNonConvergence { dim: n, norm })?;
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigenNonConvergence { dim: n, norm });
        }
        Ok(Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvalues of the Hermitian matrix `iM`.
    pub fn hermitian_eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    /// `e^{tM} = V diag(e^{-i t d}) V^H`.
    pub fn exp(&self, t: f64) -> CMatrix {
        let phases = self.phases(t);
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[k];
        }
        scaled * self.vectors.adjoint()
    }

    /// `e^{tM} x` without forming the full exponential.
    pub fn apply(&self, t: f64, x: &CVector) -> CVector {
        let phases = self.phases(t);
        let mut coeffs = self.vectors.ad_mul(x);
        for (c, p) in coeffs.iter_mut().zip(phases.iter()) {
            *c *= p;
        }
        &self.vectors * coeffs
    }

    fn phases(&self, t: f64) -> Vec<Complex64> {
        self.values
            .iter()
            .map(|&d| Complex64::from_polar(1.0, -t * d))
            .collect()
    }
}

/// `e^{tM}` for skew-Hermitian `M`.
pub fn expm_skew(m: &SkewHermitianMatrix, t: f64) -> Result<UnitaryMatrix> {
    if !t.is_finite() {
        return Err(Error::NonFinite("exponential duration"));
    }
    let spectral = m.spectral()?;
    UnitaryMatrix::new(spectral.exp(t))
}

/// `[X, Y] = XY - YX`.
pub fn commutator(x: &SkewHermitianMatrix, y: &SkewHermitianMatrix) -> Result<SkewHermitianMatrix> {
    check_dims(x.dim(), y.dim())?;
    let xy = x.matrix() * y.matrix();
    let yx = y.matrix() * x.matrix();
    Ok(SkewHermitianMatrix::from_symmetrized(xy - yx))
}

/// Dimension of the real linear span of `family` inside u(n), with the
/// default relative cutoff [`RANK_TOL`].
pub fn real_span_dimension(family: &[SkewHermitianMatrix]) -> Result<usize> {
    real_span_dimension_with_tol(family, RANK_TOL)
}

/// Rank of the real coordinate matrix of `family`: the number of singular
/// values above `rel_tol` times the largest one. The coordinate matrix has
/// the same rank as the real Gram matrix `Re tr(X_a^H X_b)`.
pub fn real_span_dimension_with_tol(family: &[SkewHermitianMatrix], rel_tol: f64) -> Result<usize> {
    let Some(first) = family.first() else {
        return Ok(0);
    };
    let n = first.dim();
    for m in family {
        check_dims(n, m.dim())?;
    }
    let rows = family.len();
    let cols = n * n;
    if cols == 0 {
        return Ok(0);
    }
    let mut coords = DMatrix::<f64>::zeros(rows, cols);
    for (r, m) in family.iter().enumerate() {
        for (c, v) in m.real_coordinates().into_iter().enumerate() {
            coords[(r, c)] = v;
        }
    }
    let sv = coords.singular_values();
    let largest = sv.iter().cloned().fold(0.0_f64, f64::max);
    if largest == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * largest).count())
}
