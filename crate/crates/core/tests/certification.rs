mod common;

use bqc_core::certification::{
    certify, connectedness, constructive_generators, frequently_connected, lagrange_basis,
    lie_rank, lie_rank_of, nonresonance, pairwise_gap_distinct, perturbation_certificate,
    CertifyOptions, Overall, PerturbationStatus, RelationStatus,
};
use bqc_core::linalg::{expm_skew, CMatrix, SkewHermitianMatrix};
use bqc_core::models::{custom_system, oscillator_system, GalerkinPair, OffsetMode};
use bqc_core::Error;
use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tridiagonal(n: usize, value: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |j, k| if j.abs_diff(k) == 1 { value } else { 0.0 })
}

/// Position operator in the Hermite basis.
fn position_system(levels: usize) -> bqc_core::models::DiscreteSpectrumSystem {
    let w = DMatrix::from_fn(levels, levels, |j, k| {
        if k == j + 1 {
            (k as f64 / 2.0).sqrt()
        } else if j == k + 1 {
            (j as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    custom_system((0..levels).map(|k| 2.0 * k as f64 + 1.0).collect(), w).unwrap()
}

#[test]
fn connectedness_examples() {
    assert!(connectedness(&tridiagonal(5, 0.3)).connected);
    let mut w = DMatrix::zeros(3, 3);
    w[(0, 1)] = 1.0;
    w[(1, 0)] = 1.0;
    w[(0, 0)] = 2.0;
    w[(1, 1)] = 2.0;
    w[(2, 2)] = 1.0;
    let c = connectedness(&w);
    assert!(!c.connected);
    assert_eq!(c.partition, vec![2]);

    let even = oscillator_system(-1.0, 0.0, OffsetMode::Normalized, 4).unwrap();
    let c = connectedness(even.coupling());
    assert!(!c.connected);
    assert_eq!(c.partition, vec![0, 2]);
}

#[test]
fn frequent_connectivity_examples() {
    let osc = oscillator_system(-1.0, 1.0, OffsetMode::Normalized, 6).unwrap();
    assert_eq!(frequently_connected(&osc, 2).first_connected_order, Some(2));
    let even = oscillator_system(-1.0, 0.0, OffsetMode::Normalized, 6).unwrap();
    for n in 2..=6 {
        let fc = frequently_connected(&even, n);
        assert!(!fc.holds_up_to_data);
        assert_eq!(fc.first_connected_order, None);
    }
    let toy = toy_system(4);
    assert_eq!(frequently_connected(&toy, 3).first_connected_order, Some(3));
}

#[test]
fn nonresonance_examples() {
    let v = nonresonance(&[2.0, 2.0, 2.0], 20, 1e-9);
    assert_eq!(v.relation, Some(vec![1, -1, 0]));
    for q in [1, 5, 1000] {
        assert_eq!(
            nonresonance(&[0.7], q, 1e-9).status,
            RelationStatus::NoneFoundWithinBounds
        );
    }
    let v = nonresonance(&[1.0, 2f64.sqrt()], 100, 1e-9);
    assert_eq!(v.status, RelationStatus::NoneFoundWithinBounds);
    assert_eq!(v.search_bound, 100);
}

#[test]
fn two_value_search_matches_brute_force() {
    // every q with |q_i| <= 100 fails the acceptance test for (1, sqrt 2)
    let g = [1.0, 2f64.sqrt()];
    let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
    for a in -100i64..=100 {
        for b in -100i64..=100 {
            if a == 0 && b == 0 {
                continue;
            }
            let res = (a as f64 * g[0] + b as f64 * g[1]).abs();
            let thr = 1e-9 * gn * ((a * a + b * b) as f64).sqrt();
            assert!(res > thr);
        }
    }
}

#[test]
fn gap_distinctness_examples() {
    let r = pairwise_gap_distinct(&[1.0, 3.0, 5.0], 1e-9);
    assert!(!r.ok);
    assert!(r.violations.contains(&((0, 1), (1, 2))));
    assert!(pairwise_gap_distinct(&[0.0, 1.0, 1.0 + 2f64.sqrt()], 1e-9).ok);
    assert!(pairwise_gap_distinct(&[0.0, 1.0], 1e-9).ok);
}

#[test]
fn lie_rank_examples() {
    let g = GalerkinPair::new(vec![1.0, 2.0], DMatrix::zeros(2, 2)).unwrap();
    let r = lie_rank(&g, 8);
    assert_eq!(r.rank, 1);
    assert!(!r.contains_sun);

    // B = [[0,1],[-1,0]] is -i W with W = [[0,i],[-i,0]], which is not real;
    // build the pair directly from skew matrices instead
    let a = SkewHermitianMatrix::imaginary_diagonal(&[1.0, 2.0]);
    let b = SkewHermitianMatrix::new(CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    ))
    .unwrap();
    assert_eq!(lie_rank_of(&a, &b, 8).unwrap().rank, 4);

    let g = GalerkinPair::new(vec![0.0, 1.0, 1.0 + 2f64.sqrt()], tridiagonal(3, 1.0)).unwrap();
    let r = lie_rank(&g, 18);
    assert!(r.rank >= 8 && r.contains_sun && r.stabilized);
}

#[test]
fn lagrange_examples() {
    let p = lagrange_basis(&[1.0, 4.0, 9.0], 0);
    let want = [36.0 / 24.0, -13.0 / 24.0, 1.0 / 24.0];
    for (a, b) in p.iter().zip(want) {
        assert!((a - b).abs() < 1e-14);
    }
    let eval = |x: f64| p.iter().rev().fold(0.0, |acc, c| acc * x + c);
    assert!((eval(1.0) - 1.0).abs() < 1e-13);
    assert!(eval(4.0).abs() < 1e-13 && eval(9.0).abs() < 1e-13);
}

#[test]
fn generators_two_level() {
    let w = DMatrix::from_row_slice(2, 2, &[0.3, 0.8, 0.8, -0.2]);
    let g = GalerkinPair::new(vec![0.0, 1.0], w).unwrap();
    let gens = constructive_generators(&g, 0, 1).unwrap();
    let mut off = g.b().matrix().clone();
    off[(0, 0)] = Complex64::new(0.0, 0.0);
    off[(1, 1)] = Complex64::new(0.0, 0.0);
    assert!(max_abs(&(gens.n.matrix() - off)) < 1e-12);
}

#[test]
fn generators_recover_elementary_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = random_symmetric(&mut rng, 4, 1.0);
    let lambda = vec![0.0, 1.0, 1.0 + 2f64.sqrt(), 1.0 + 2f64.sqrt() + 3f64.sqrt()];
    let g = GalerkinPair::new(lambda, w).unwrap();
    let gens = constructive_generators(&g, 0, 2).unwrap();
    let e = SkewHermitianMatrix::elementary_e(4, 0, 2);
    let f = SkewHermitianMatrix::elementary_f(4, 0, 2);
    assert!(max_abs(&(gens.e.matrix() - e.matrix())) <= 1e-8);
    assert!(max_abs(&(gens.f.matrix() - f.matrix())) <= 1e-8);
    assert!(gens.max_residual() <= 1e-8);
}

#[test]
fn generator_errors() {
    let g = GalerkinPair::new(vec![0.0, 1.0, 2.5], tridiagonal(3, 1.0)).unwrap();
    assert!(matches!(
        constructive_generators(&g, 0, 2),
        Err(Error::ZeroCoupling(0, 2))
    ));
    let resonant =
        GalerkinPair::new(vec![1.0, 3.0, 5.0], DMatrix::from_element(3, 3, 1.0)).unwrap();
    assert!(matches!(
        constructive_generators(&resonant, 0, 1),
        Err(Error::CollidingGaps { .. })
    ));
    assert!(constructive_generators(&g, 1, 1).is_err());
}

#[test]
fn perturbation_examples() {
    let x = position_system(5);
    let v = perturbation_certificate(&x, 4, 20, 1e-9).unwrap();
    assert_eq!(v.status, PerturbationStatus::Refuted);
    assert_eq!(v.relation.relation, Some(vec![1, 0, 0, 0]));

    let flat = custom_system(vec![0.0, 1.0, 2.0], DMatrix::identity(3, 3)).unwrap();
    let v = perturbation_certificate(&flat, 2, 20, 1e-9).unwrap();
    assert_eq!(v.relation.relation, Some(vec![1, -1]));

    let osc = oscillator_system(-1.0, 1.0, OffsetMode::Normalized, 6).unwrap();
    // b_kk are Gaussian moments, rational multiples of 1/sqrt(2):
    // b_00 = 1/sqrt(2), b_11 = 5/(8 sqrt(2))
    let v = perturbation_certificate(&osc, 4, 50, 1e-8).unwrap();
    assert_eq!(v.relation.relation, Some(vec![5, -8, 0, 0]));
    assert_eq!(v.status, PerturbationStatus::Refuted);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = random_symmetric(&mut rng, 4, 1.0);
    let sys = custom_system(vec![0.0, 1.0, 2.5, 4.5], w).unwrap();
    let v = perturbation_certificate(&sys, 4, 20, 1e-12).unwrap();
    assert_eq!(v.relation.status, RelationStatus::NoneFoundWithinBounds);
}

#[test]
fn certify_examples() {
    let x = position_system(6);
    let r = certify(&x, 4, &CertifyOptions::default()).unwrap();
    assert!(r.connectivity.connected);
    assert!(r.nonresonant_gaps.found());
    assert_eq!(r.overall, Overall::Refuted);
    assert!(r.witness.is_some());

    let even = oscillator_system(-1.0, 0.0, OffsetMode::Normalized, 6).unwrap();
    let r = certify(&even, 4, &CertifyOptions::default()).unwrap();
    assert!(!r.connectivity.connected);
    assert_eq!(r.connectivity.partition, vec![0, 2]);
    assert_eq!(r.overall, Overall::Refuted);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w = random_symmetric(&mut rng, 4, 1.0);
    let lambda = vec![
        0.0,
        2f64.sqrt(),
        2f64.sqrt() + 3f64.sqrt(),
        2f64.sqrt() + 3f64.sqrt() + 5f64.sqrt(),
    ];
    let sys = custom_system(lambda, w).unwrap();
    let r = certify(&sys, 4, &CertifyOptions::default()).unwrap();
    assert_eq!(r.overall, Overall::Certified);
    assert!(r.lie_rank.rank >= 15);
    assert!(r
        .generators
        .iter()
        .all(|g| g.residual_n.max(g.residual_e).max(g.residual_f) <= 1e-8));

    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["overall"], "certified");
    assert_eq!(
        json["nonresonant_gaps"]["status"],
        "none_found_within_bounds"
    );
}

#[test]
fn vandermonde_literal_identity_has_sign_defect() {
    // det(S_N) = prod(q_k - q_j) only when N(N-1)/2 is even
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=6 {
        let q = random_rationals(&mut rng, n);
        let det = determinant(s_matrix(&q));
        let prod = gap_product(&q);
        assert_eq!(det == prod, matches!(n % 4, 0 | 1), "N = {n}");
        assert_eq!(det, sign_factor(n) * prod);
    }
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let h = random_skew(rng, n, 2.0);
    expm_skew(&h, 1.0).unwrap().into_matrix()
}

fn conjugate(m: &SkewHermitianMatrix, v: &CMatrix) -> SkewHermitianMatrix {
    SkewHermitianMatrix::new(v * m.matrix() * v.adjoint()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vandermonde_signed_identity(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_rationals(&mut rng, n);
        prop_assert_eq!(determinant(s_matrix(&q)), sign_factor(n) * gap_product(&q));
    }

    #[test]
    fn nonresonance_self_consistent(values in prop::collection::vec(-5.0f64..5.0, 1..5), snap in any::<bool>(), q in 1u64..8, tol_exp in -12i32..-3) {
        // snapping to a grid plants relations
        let values: Vec<f64> = if snap { values.iter().map(|v| (v * 4.0).round() / 4.0).collect() } else { values };
        let v = nonresonance(&values, q, 10f64.powi(tol_exp));
        prop_assert!(v.is_self_consistent(&values));
    }

    #[test]
    fn lie_rank_conjugation_invariant(seed in any::<u64>(), n in 2usize..5, sparse in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = random_symmetric(&mut rng, n, 1.0);
        if sparse {
            // decouple the last level
            for j in 0..n - 1 {
                w[(j, n - 1)] = 0.0;
                w[(n - 1, j)] = 0.0;
            }
        }
        let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = GalerkinPair::new(lambda, w).unwrap();
        let v = random_unitary(&mut rng, n);
        let before = lie_rank(&g, 2 * n * n).rank;
        let after = lie_rank_of(&conjugate(g.a(), &v), &conjugate(g.b(), &v), 2 * n * n).unwrap().rank;
        prop_assert_eq!(before, after);
    }

    #[test]
    fn generator_bracket_identity(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lambda = vec![0.0];
        for k in 1..n {
            lambda.push(lambda[k - 1] + rng.random_range(0.3..1.7));
        }
        prop_assume!(pairwise_gap_distinct(&lambda, 1e-3).ok);
        let g = GalerkinPair::new(lambda.clone(), random_symmetric(&mut rng, n, 1.0)).unwrap();
        let j = rng.random_range(0..n);
        let k = (j + rng.random_range(1..n)) % n;
        prop_assume!(g.b().matrix()[(j, k)].norm() > 1e-3);
        let gens = constructive_generators(&g, j, k).unwrap();
        let bracket = g.a().matrix() * gens.n.matrix() - gens.n.matrix() * g.a().matrix();
        let beta = g.b().matrix()[(j, k)];
        let mut want = CMatrix::zeros(n, n);
        let factor = Complex64::new(0.0, lambda[j] - lambda[k]);
        want[(j, k)] = factor * beta;
        want[(k, j)] = factor * beta.conj();
        prop_assert!(max_abs(&(bracket - want)) <= 1e-8);
    }

    #[test]
    fn connectedness_permutation_invariant(seed in any::<u64>(), n in 1usize..9, density in 0.0f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in j + 1..n {
                if rng.random_bool(density) {
                    w[(j, k)] = 1.0;
                    w[(k, j)] = 1.0;
                }
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let pw = DMatrix::from_fn(n, n, |j, k| w[(perm[j], perm[k])]);
        let (a, b) = (connectedness(&w), connectedness(&pw));
        prop_assert_eq!(a.connected, b.connected);
        let sizes = |c: &bqc_core::certification::Connectivity| {
            let mut s: Vec<usize> = c.components.iter().map(|x| x.len()).collect();
            s.sort();
            s
        };
        prop_assert_eq!(sizes(&a), sizes(&b));
        prop_assert_eq!(a.partition.len(), b.partition.len());
    }
}
