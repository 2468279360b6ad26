#![allow(dead_code)]

use bqc_core::control::{Frame, Piece, PiecewiseConstantControl};
use bqc_core::linalg::{CMatrix, CVector, SkewHermitianMatrix};
use bqc_core::models::{custom_system, DiscreteSpectrumSystem};
use bqc_core::simulation::QuantumState;
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Square roots of square-free integers, Q-linearly independent.
const ROOTS: [f64; 9] = [1.0, 2.0, 3.0, 5.0, 6.0, 7.0, 10.0, 11.0, 13.0];

/// Levels with consecutive gaps `sqrt(1), sqrt(2), sqrt(3), sqrt(5), ...`
/// and a tridiagonal coupling of ones.
pub fn toy_system(levels: usize) -> DiscreteSpectrumSystem {
    let mut lambda = vec![0.0];
    for k in 1..levels {
        lambda.push(lambda[k - 1] + ROOTS[k - 1].sqrt());
    }
    let w = DMatrix::from_fn(
        levels,
        levels,
        |j, k| if j.abs_diff(k) == 1 { 1.0 } else { 0.0 },
    );
    custom_system(lambda, w).unwrap()
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let x = rng.random_range(-scale..scale);
            w[(j, k)] = x;
            w[(k, j)] = x;
        }
    }
    w
}

pub fn random_skew(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SkewHermitianMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    });
    SkewHermitianMatrix::new((&m - m.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> QuantumState {
    let v = CVector::from_fn(n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    QuantumState::normalized(v).unwrap()
}

pub fn random_control(
    rng: &mut ChaCha8Rng,
    frame: Frame,
    delta: f64,
    pieces: usize,
    t_max: f64,
) -> PiecewiseConstantControl {
    let pieces = (0..pieces)
        .map(|_| {
            let t = rng.random_range(0.01..t_max);
            let u = match frame {
                Frame::Original => delta * rng.random_range(0.01..0.99),
                Frame::Reparametrized => delta * rng.random_range(1.01..20.0),
            };
            Piece::new(t, u)
        })
        .collect();
    PiecewiseConstantControl::new(frame, delta, pieces).unwrap()
}

/// Adaptive Simpson on `[a, b]`, started from 64 panels so that integrands
/// vanishing at the first few sample points are not mistaken for zero.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, f1) = (f(x0), f(x1));
            let (m, fm, whole) = simpson(f, x0, f0, x1, f1);
            recurse(f, x0, f0, x1, f1, m, fm, whole, tol / panels as f64, 40)
        })
        .sum()
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Rows `k`, columns `r = 0..N-1`: the elementary symmetric polynomial of
/// degree `r` in the `q`s other than `q_k`.
pub fn s_matrix(q: &[BigRational]) -> Vec<Vec<BigRational>> {
    let n = q.len();
    (0..n)
        .map(|k| {
            let mut e = vec![BigRational::zero(); n];
            e[0] = BigRational::one();
            for (j, qj) in q.iter().enumerate() {
                if j == k {
                    continue;
                }
                for r in (1..n).rev() {
                    let add = &e[r - 1] * qj;
                    e[r] += add;
                }
            }
            e
        })
        .collect()
}

/// Exact determinant by fraction-field Gaussian elimination.
pub fn determinant(mut m: Vec<Vec<BigRational>>) -> BigRational {
    let n = m.len();
    let mut det = BigRational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return BigRational::zero();
        };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        let pivot = m[c][c].clone();
        det *= &pivot;
        for r in c + 1..n {
            if m[r][c].is_zero() {
                continue;
            }
            let f = &m[r][c] / &pivot;
            for cc in c..n {
                let sub = &f * &m[c][cc];
                m[r][cc] -= sub;
            }
        }
    }
    det
}

/// `prod_{j<k} (q_k - q_j)`.
pub fn gap_product(q: &[BigRational]) -> BigRational {
    let mut p = BigRational::one();
    for k in 0..q.len() {
        for j in 0..k {
            p *= &q[k] - &q[j];
        }
    }
    p
}

/// Distinct nonzero rationals with small numerators and denominators.
pub fn random_rationals(rng: &mut ChaCha8Rng, n: usize) -> Vec<BigRational> {
    let mut out: Vec<BigRational> = Vec::new();
    while out.len() < n {
        let num = rng.random_range(-40i64..=40);
        let den = rng.random_range(1i64..=12);
        let q = rational(num, den);
        if !q.is_zero() && !out.contains(&q) {
            out.push(q);
        }
    }
    out
}

pub fn sign_factor(n: usize) -> BigRational {
    if (n * n.saturating_sub(1) / 2) % 2 == 0 {
        BigRational::one()
    } else {
        -BigRational::one()
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
