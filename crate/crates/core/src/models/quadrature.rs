//! Gauss–Hermite rules for the weight `e^{-x^2}` on the real line.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of an `m`-point Gauss–Hermite rule, exact for
/// polynomials of degree `2m - 1` against `e^{-x^2}`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch eigenvalue seeds, polished by Newton on the orthonormal
    /// Hermite polynomial. Weights come from the Christoffel function
    /// `1 / sum_k h_k(x)^2`, which keeps small weights relatively accurate.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "Gauss-Hermite rule needs at least one node");
        let mut jacobi = DMatrix::<f64>::zeros(m, m);
        for k in 1..m {
            let off = (k as f64 / 2.0).sqrt();
            jacobi[(k, k - 1)] = off;
            jacobi[(k - 1, k)] = off;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, dp) = orthonormal_hermite_with_derivative(m, *x);
                if dp == 0.0 {
                    break;
                }
                let step = p / dp;
                *x -= step;
                if step.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
        }
        // exact symmetry of the rule
        for i in 0..m / 2 {
            let s = 0.5 * (nodes[m - 1 - i] - nodes[i]);
            nodes[i] = -s;
            nodes[m - 1 - i] = s;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }

        let weights = nodes
            .iter()
            .map(|&x| {
                let sum: f64 = orthonormal_hermite(m, x).iter().map(|h| h * h).sum();
                1.0 / sum
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `h_0(x), ..., h_{count-1}(x)`: Hermite polynomials orthonormal with
/// respect to `e^{-x^2}`, i.e. `h_k = H_k / sqrt(2^k k! sqrt(pi))`.
pub fn orthonormal_hermite(count: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let h0 = std::f64::consts::PI.powf(-0.25);
    out.push(h0);
    if count == 1 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * x * h0);
    for k in 1..count - 1 {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

fn orthonormal_hermite_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let h = orthonormal_hermite(m + 1, x);
    // h_m' = sqrt(2m) h_{m-1}
    (h[m], (2.0 * m as f64).sqrt() * h[m - 1])
}
