mod common;

use std::f64::consts::PI;

use bqc_core::models::{
    box3d_lambda_prime, box3d_system, box_coupling_1d, box_eigenvalue, custom_system,
    oscillator_system, tail_cutoff, truncate, DiscreteSpectrumSystem, ModelSpec, OffsetMode,
    SpectrumMode,
};
use bqc_core::Error;
use common::integrate;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

/// Orthonormal Hermite functions `H_k(x) e^{-x^2/2} / sqrt(2^k k! sqrt(pi))`.
fn hermite_functions(count: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; count];
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if count > 1 {
        out[1] = 2f64.sqrt() * x * out[0];
    }
    for k in 1..count.saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
    out
}

fn oscillator_oracle(a: f64, b: f64, c: f64, j: usize, k: usize) -> f64 {
    let count = j.max(k) + 1;
    let f = |x: f64| {
        let h = hermite_functions(count, x);
        (a * x * x + b * x + c).exp() * h[j] * h[k]
    };
    integrate(&f, -14.0, 14.0, 1e-13)
}

#[test]
fn oscillator_matches_direct_integration() {
    for &(a, b) in &[(-1.0, 1.0), (-0.5, -0.3), (-2.0, 0.7)] {
        let sys = oscillator_system(a, b, OffsetMode::Normalized, 6).unwrap();
        let c = b * b / (4.0 * (a - 1.0));
        for j in 0..6 {
            for k in j..6 {
                let want = oscillator_oracle(a, b, c, j, k);
                assert!(
                    (sys.coupling()[(j, k)] - want).abs() < 1e-10,
                    "({a},{b}) [{j}][{k}]"
                );
            }
        }
    }
}

#[test]
fn oscillator_examples() {
    let sys = oscillator_system(-1.0, 1.0, OffsetMode::Normalized, 4).unwrap();
    assert_eq!(sys.lambda(), &[1.0, 3.0, 5.0, 7.0]);
    assert!((sys.coupling()[(0, 1)] - 0.25).abs() < 1e-12);
    let explicit = oscillator_system(-1.0, 1.0, OffsetMode::Explicit(-0.125), 4).unwrap();
    assert!((explicit.coupling() - sys.coupling()).amax() < 1e-15);
    let g = truncate(&sys, 2).unwrap();
    assert_eq!(g.a().matrix()[(0, 0)], Complex64::new(0.0, 1.0));
    assert_eq!(g.a().matrix()[(1, 1)], Complex64::new(0.0, 3.0));

    assert!(matches!(
        oscillator_system(0.0, 1.0, OffsetMode::Normalized, 4),
        Err(Error::InvalidParameter(_))
    ));
    assert!(matches!(
        oscillator_system(0.5, 1.0, OffsetMode::Normalized, 4),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn box_examples() {
    assert!((box_eigenvalue([1.0, 1.0, 1.0], [1, 1, 1]) - 3.0 * PI * PI).abs() < 1e-12);
    assert!((3.0 * PI * PI - 29.6088).abs() < 1e-4);

    let flat = box3d_system([1.0, 1.3, 1.7], [0.0; 3], 8, SpectrumMode::AllowDegenerate).unwrap();
    let id = DMatrix::<f64>::identity(8, 8);
    assert!((flat.coupling() - id).amax() < 1e-14);

    let sys = box3d_system(
        [1.0, 1.3, 1.7],
        [0.5, 0.7, 0.9],
        10,
        SpectrumMode::SimpleSpectrum,
    )
    .unwrap();
    assert!(sys.coupling().iter().all(|&w| w != 0.0));
    let labels = sys.labels().unwrap();
    let j = labels.iter().position(|t| t == &vec![1, 2, 1]).unwrap();
    let lp = box3d_lambda_prime([1.0, 1.3, 1.7], [0.5, 0.7, 0.9], [1, 2, 1]).unwrap();
    assert!((lp - sys.coupling()[(j, j)]).abs() < 1e-8);

    let near_zero = box3d_lambda_prime([1.0, 1.0, 1.0], [1e-6; 3], [1, 2, 3]).unwrap();
    assert!((near_zero - 1.0).abs() < 1e-4);
    assert!(box3d_lambda_prime([1.0; 3], [0.0, 1.0, 1.0], [1, 1, 1]).is_err());
    assert!(box3d_lambda_prime([1.0; 3], [-0.4, 1.0, 2.0], [3, 1, 2]).unwrap() > 0.0);
}

#[test]
fn cube_has_degenerate_levels() {
    match box3d_system([1.0; 3], [0.3; 3], 4, SpectrumMode::SimpleSpectrum) {
        Err(Error::DegenerateSpectrum(pairs)) => {
            assert!(pairs.contains(&([1, 1, 2], [1, 2, 1])));
        }
        other => panic!("expected degeneracy error, got {other:?}"),
    }
    let sys = box3d_system([1.0; 3], [0.3; 3], 4, SpectrumMode::AllowDegenerate).unwrap();
    let labels = sys.labels().unwrap();
    assert_eq!(labels[1], vec![1, 1, 2]);
    assert_eq!(labels[2], vec![1, 2, 1]);
    assert_eq!(labels[3], vec![2, 1, 1]);
}

#[test]
fn custom_system_examples() {
    let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let sys = custom_system(vec![1.0, 3.0], w.clone()).unwrap();
    assert_eq!(sys.lambda(), &[1.0, 3.0]);
    assert_eq!(sys.coupling(), &w);

    let w = DMatrix::from_row_slice(2, 2, &[5.0, 1.0, 1.0, 7.0]);
    let sys = custom_system(vec![3.0, 1.0], w).unwrap();
    assert_eq!(sys.lambda(), &[1.0, 3.0]);
    assert_eq!(sys.coupling()[(0, 0)], 7.0);
    assert_eq!(sys.coupling()[(1, 1)], 5.0);

    let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0 + 1e-6, 0.0]);
    assert!(matches!(
        custom_system(vec![1.0, 3.0], bad),
        Err(Error::AsymmetricCoupling { .. })
    ));
    assert!(custom_system(vec![1.0], DMatrix::zeros(1, 1)).is_err());
    assert!(custom_system(vec![1.0, f64::NAN], DMatrix::zeros(2, 2)).is_err());
}

#[test]
fn full_truncation_is_stored_data() {
    let w = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, -1.0, 0.5, 0.0, 0.5, 3.0]);
    let sys = custom_system(vec![0.0, 1.0, 2.5], w.clone()).unwrap();
    let g = truncate(&sys, 3).unwrap();
    assert_eq!(g.coupling(), &w);
    assert!(truncate(&sys, 1).is_err());
    assert!(truncate(&sys, 4).is_err());
}

#[test]
fn tail_cutoff_examples() {
    let mut w = DMatrix::zeros(5, 5);
    w[(0, 1)] = 1.0;
    w[(1, 0)] = 1.0;
    let sys = custom_system(vec![0.0, 1.0, 2.0, 3.0, 4.0], w).unwrap();
    assert_eq!(tail_cutoff(&sys, 2, 1e-9).unwrap().order, 2);

    let dense = custom_system(vec![0.0, 1.0, 2.0], DMatrix::from_element(3, 3, 0.5)).unwrap();
    let cut = tail_cutoff(&dense, 2, 10.0).unwrap();
    assert_eq!(cut.order, 2);
    assert!(!cut.data_boundary);

    // direct tail summation on the Gaussian oscillator
    let osc = oscillator_system(-1.0, 1.0, OffsetMode::Normalized, 20).unwrap();
    let mu = 1e-6;
    let tail = |j: usize, from: usize| {
        (from..20)
            .map(|k| osc.coupling()[(j, k)].powi(2))
            .sum::<f64>()
    };
    let want = (2..=20)
        .find(|&cut| (0..2).all(|j| tail(j, cut) < mu))
        .unwrap();
    let got = tail_cutoff(&osc, 2, mu).unwrap();
    assert_eq!(got.order, want);
    assert!(!got.data_boundary);
}

#[test]
fn model_spec_builds() {
    let spec: ModelSpec =
        serde_json::from_str(r#"{"model":"oscillator","a":-1,"b":1,"c":"normalized","levels":3}"#)
            .unwrap();
    let sys = spec.build().unwrap();
    assert_eq!(sys.levels(), 3);
    let spec: ModelSpec = serde_json::from_str(
        r#"{"model":"box3d","l":[1,1.3,1.7],"alpha":[0.5,0.7,0.9],"levels":4}"#,
    )
    .unwrap();
    assert_eq!(spec.build().unwrap().levels(), 4);
    assert!(serde_json::from_str::<ModelSpec>(
        r#"{"model":"oscillator","a":-1,"b":1,"c":"x","levels":3}"#
    )
    .is_err());
}

#[test]
fn document_round_trip() {
    let sys = box3d_system(
        [1.0, 1.3, 1.7],
        [0.5, -0.7, 0.9],
        5,
        SpectrumMode::AllowDegenerate,
    )
    .unwrap();
    let back = DiscreteSpectrumSystem::from_json(&sys.to_json().unwrap()).unwrap();
    assert_eq!(back, sys);
    let text = r#"{"levels":2,"lambda":[3,1],"W":[[0,1],[1,0]]}"#;
    let sys = DiscreteSpectrumSystem::from_json(text).unwrap();
    assert_eq!(sys.lambda(), &[1.0, 3.0]);
    let wrong = r#"{"levels":3,"lambda":[3,1],"W":[[0,1],[1,0]]}"#;
    assert!(DiscreteSpectrumSystem::from_json(wrong).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parity_selection(a in -3.0f64..-0.1, b in prop_oneof![Just(0.0), -2.0f64..-0.2, 0.2f64..2.0]) {
        let sys = oscillator_system(a, b, OffsetMode::Normalized, 6).unwrap();
        let odd_max = (0..6)
            .flat_map(|j| (0..6).map(move |k| (j, k)))
            .filter(|(j, k)| (j + k) % 2 == 1)
            .map(|(j, k)| sys.coupling()[(j, k)].abs())
            .fold(0.0, f64::max);
        if b == 0.0 {
            prop_assert!(odd_max < 1e-10);
        } else {
            prop_assert!(odd_max >= 1e-10);
        }
    }

    #[test]
    fn box_1d_matches_quadrature(k in 1u32..6, h in 1u32..6, alpha in -2.0f64..2.0, l in 0.3f64..3.0) {
        let f = |x: f64| (alpha * x).exp() * 2.0 / l * (k as f64 * PI * x / l).sin() * (h as f64 * PI * x / l).sin();
        let want = integrate(&f, 0.0, l, 1e-14);
        prop_assert!((box_coupling_1d(k, h, alpha, l) - want).abs() < 1e-10);
    }

    #[test]
    fn box_coupling_is_product_of_1d(l0 in 0.5f64..2.0, l1 in 0.5f64..2.0, a0 in -1.0f64..1.0, a1 in -1.0f64..1.0, a2 in -1.0f64..1.0) {
        let (l, alpha) = ([l0, l1, 1.1], [a0, a1, a2]);
        let sys = box3d_system(l, alpha, 6, SpectrumMode::AllowDegenerate).unwrap();
        let labels = sys.labels().unwrap();
        for p in 0..6 {
            for q in 0..6 {
                let want: f64 = (0..3).map(|i| box_coupling_1d(labels[p][i], labels[q][i], alpha[i], l[i])).product();
                prop_assert_eq!(sys.coupling()[(p, q)], want);
            }
        }
    }

    #[test]
    fn truncation_is_exact(n in 2usize..6, seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w = common::random_symmetric(&mut rng, 6, 2.0);
        let sys = custom_system((0..6).map(|k| k as f64 * 1.1).collect(), w).unwrap();
        let g = truncate(&sys, n).unwrap();
        for j in 0..n {
            for k in 0..n {
                prop_assert_eq!(g.b().matrix()[(j, k)], Complex64::new(0.0, -sys.coupling()[(j, k)]));
            }
        }
    }

    #[test]
    fn tail_cutoff_monotone(seed in any::<u64>(), mu1 in 1e-6f64..1.0, mu2 in 1e-6f64..1.0, n1 in 1usize..7, n2 in 1usize..7) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w = common::random_symmetric(&mut rng, 7, 0.6);
        let sys = custom_system((0..7).map(|k| k as f64).collect(), w).unwrap();
        let (lo, hi) = (mu1.min(mu2), mu1.max(mu2));
        for n in 1..=7 {
            prop_assert!(tail_cutoff(&sys, n, hi).unwrap().order <= tail_cutoff(&sys, n, lo).unwrap().order);
        }
        let (na, nb) = (n1.min(n2), n1.max(n2));
        prop_assert!(tail_cutoff(&sys, na, mu1).unwrap().order <= tail_cutoff(&sys, nb, mu1).unwrap().order);
    }
}
