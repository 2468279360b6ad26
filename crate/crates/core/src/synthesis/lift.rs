//! Recurrence-time searches on the torus of eigenphases, the oscillating
//! lift that decouples the first `n` modes from modes `n..N`, and the final
//! constant phase-fixing piece.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certification::nonresonance;
use crate::control::{Frame, Piece, PiecewiseConstantControl};
use crate::error::{Error, Result};
use crate::models::{DiscreteSpectrumSystem, GalerkinPair};

/// Distance from `x` to the nearest multiple of `2 pi`.
pub fn circle_distance(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    r.min(TAU - r)
}

/// `max_j dist(freqs[j] s - targets[j], 2 pi Z)`.
pub fn phase_residual(freqs: &[f64], targets: &[f64], s: f64) -> f64 {
    freqs
        .iter()
        .zip(targets)
        .map(|(f, t)| circle_distance(f * s - t))
        .fold(0.0, f64::max)
}

/// First time `s >= start` (scanning forward) with every `freqs[j] s` within
/// `tol` of `targets[j]` modulo `2 pi`, searched up to `start + horizon`.
///
/// The grid step `pi / (4 max|f|)` moves no phase by more than `pi/4`, so any
/// solution lies within one step of a grid point whose residual is at most
/// `tol + pi/4`. Around such points every phase stays inside one V of its
/// distance function, the residual is convex, and a ternary search finds its
/// minimum.
pub fn find_recurrence(
    freqs: &[f64],
    targets: &[f64],
    tol: f64,
    start: f64,
    horizon: f64,
) -> Result<(f64, f64)> {
    let fmax = freqs.iter().map(|f| f.abs()).fold(0.0, f64::max);
    let fail = |best: f64| Error::PhaseSearchFailed {
        target: targets.to_vec(),
        horizon,
        best_residual: best,
    };
    if fmax == 0.0 {
        let r = phase_residual(freqs, targets, start);
        return if r <= tol {
            Ok((start, r))
        } else {
            Err(fail(r))
        };
    }
    let step = PI / (4.0 * fmax);
    let gate = tol + PI / 4.0;
    let points = (horizon / step).ceil() as u64 + 1;
    let mut best = f64::INFINITY;
    for i in 0..points {
        let s = start + i as f64 * step;
        let r = phase_residual(freqs, targets, s);
        best = best.min(r);
        if r > gate {
            continue;
        }
        let (mut lo, mut hi) = ((s - step).max(start), s + step);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if phase_residual(freqs, targets, m1) <= phase_residual(freqs, targets, m2) {
                hi = m2;
            } else {
                lo = m1;
            }
            if hi - lo <= 1e-15 * hi.abs().max(1.0) {
                break;
            }
        }
        let s_best = 0.5 * (lo + hi);
        let r_best = phase_residual(freqs, targets, s_best);
        best = best.min(r_best);
        if r_best <= tol {
            return Ok((s_best, r_best));
        }
    }
    Err(fail(best))
}

/// The constant piece `(tau, u)` closing a synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCorrection {
    pub tau: f64,
    pub u: f64,
    pub v2: f64,
    /// `max_j |e^{i l_j v2} - 1|`.
    pub phase_error: f64,
}

impl PhaseCorrection {
    pub fn control(&self, delta: f64) -> Result<PiecewiseConstantControl> {
        PiecewiseConstantControl::new(
            Frame::Reparametrized,
            delta,
            vec![Piece::new(self.tau, self.u)],
        )
    }
}

/// Bound on `|Pi_n q(tau) - Pi_n q(0)| / tau` at order `N`: the Euclidean
/// norm of the first `n` coupling columns of `W^(N)`.
pub fn phase_coupling_bound(g: &GalerkinPair, n: usize) -> f64 {
    g.column_norms()
        .iter()
        .take(n)
        .map(|c| c * c)
        .sum::<f64>()
        .sqrt()
}

/// Finds `v2 > 0` with `max_j |e^{i l_j v2} - 1| <= eps/2` and a duration
/// `tau = min(tau_max, eps / (2 C))` such that `u = (v1 + v2)/tau > delta`.
/// A constant piece `(tau, u)` then maps `psi` to within `eps` of
/// `e^{v1 A} psi` on the first `n` modes, `C` bounding the drift of the
/// interaction-frame coordinates (see [`phase_coupling_bound`]).
pub fn phase_correction(
    lambda: &[f64],
    v1: f64,
    delta: f64,
    eps: f64,
    tau_max: f64,
    coupling_bound: f64,
    horizon: f64,
) -> Result<PhaseCorrection> {
    if !(eps > 0.0) || !(delta > 0.0) || !(tau_max > 0.0) || !v1.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "phase correction needs eps, delta, tau_max > 0 and finite v1 (eps={eps}, delta={delta}, tau_max={tau_max}, v1={v1})"
        )));
    }
    let tau = if coupling_bound > 0.0 {
        tau_max.min(eps / (2.0 * coupling_bound))
    } else {
        tau_max
    };
    // |e^{i x} - 1| = 2 |sin(x/2)|
    let phase_tol = 2.0 * (eps / 4.0).min(1.0).asin();
    let min_v2 = (delta * tau - v1).max(0.0);
    let start = min_v2 + tau * delta * 1e-9 + f64::MIN_POSITIVE;
    let targets = vec![0.0; lambda.len()];
    let (mut v2, _) = find_recurrence(lambda, &targets, phase_tol, start, horizon)?;
    let mut u = (v1 + v2) / tau;
    // rounding may land exactly on delta
    while !(u > delta) {
        v2 = f64::from_bits(v2.to_bits() + 1);
        u = (v1 + v2) / tau;
    }
    let phase_error = lambda
        .iter()
        .map(|l| (Complex64::from_polar(1.0, l * v2) - 1.0).norm())
        .fold(0.0, f64::max);
    Ok(PhaseCorrection {
        tau,
        u,
        v2,
        phase_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlateauKind {
    W,
    Z,
}

/// One recurrence time of the lift: the value reached by the integrated
/// control at the end of a ramp piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftPlateau {
    /// Index of the ramp piece ending at this value.
    pub piece: usize,
    pub theta: f64,
    /// Plateau value of the target's integrated control.
    pub w: f64,
    pub kind: PlateauKind,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftOptions {
    pub phase_tol: f64,
    /// Sawtooth teeth per plateau; even so that W and Z times pair up.
    pub subintervals: usize,
    /// Creep slope; defaults to `2 delta`.
    pub delta_bar: Option<f64>,
    /// Plateaus per target piece.
    pub plateaus_per_piece: usize,
    pub horizon: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            phase_tol: 0.05,
            subintervals: 16,
            delta_bar: None,
            plateaus_per_piece: 1,
            horizon: 1e6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lifted {
    pub control: PiecewiseConstantControl,
    pub plateaus: Vec<LiftPlateau>,
}

/// Frequencies `l_1 - l_j`, `j = 2..N`, and their phase targets for a
/// plateau value `w`.
fn lift_targets(lambda: &[f64], n: usize, w: f64, kind: PlateauKind) -> (Vec<f64>, Vec<f64>) {
    let freqs: Vec<f64> = lambda[1..].iter().map(|l| lambda[0] - l).collect();
    let targets = freqs
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let j = i + 1;
            let shift = if kind == PlateauKind::Z && j >= n {
                PI
            } else {
                0.0
            };
            f * w + shift
        })
        .collect();
    (freqs, targets)
}

/// Replaces each plateau of the target's integrated value by a sawtooth whose
/// teeth sit alternately at W-type times (all phases `(l_1 - l_j) s` match
/// those of `w`) and Z-type times (phases of modes `n..N` shifted by `pi`),
/// so that the off-diagonal block of the conjugated coupling averages out.
///
/// Each plateau `[t1, t2]` is cut into `k` teeth of length `(t2 - t1)/k`; a
/// tooth is a ramp of length `(t2 - t1)/k^2` up to the recurrence time
/// followed by a creep at slope `delta_bar`. The target's integrated value is
/// approximated by its midpoint value on each plateau.
pub fn lift_control(
    target: &PiecewiseConstantControl,
    sys: &DiscreteSpectrumSystem,
    n: usize,
    big_n: usize,
    options: &LiftOptions,
) -> Result<Lifted> {
    if target.frame() != Frame::Reparametrized {
        return Err(Error::InvalidControl(
            "lift_control expects a reparametrized-frame control".into(),
        ));
    }
    if n < 1 || big_n < n || big_n > sys.levels() {
        return Err(Error::OrderOutOfRange {
            order: big_n,
            min: n.max(1),
            max: sys.levels(),
        });
    }
    if big_n == n {
        return Ok(Lifted {
            control: target.clone(),
            plateaus: Vec::new(),
        });
    }
    let k = options.subintervals.max(2);
    if k % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "subintervals must be even, got {k}"
        )));
    }
    let delta = target.delta();
    let delta_bar = options.delta_bar.unwrap_or(2.0 * delta);
    if !(delta_bar > delta) {
        return Err(Error::InvalidParameter(format!(
            "creep slope {delta_bar} must exceed delta {delta}"
        )));
    }
    let lambda = &sys.lambda()[..big_n];
    let gaps: Vec<f64> = lambda.windows(2).map(|w| w[1] - w[0]).collect();
    if nonresonance(&gaps, 10, 1e-9).found() {
        log::warn!("gaps of the first {big_n} levels satisfy a small integer relation; recurrence search may fail");
    }

    let mut plateaus_src = Vec::new();
    let mut v = 0.0;
    for p in target.pieces() {
        let m = options.plateaus_per_piece.max(1);
        let len = p.duration / m as f64;
        for i in 0..m {
            let w = v + p.value * len * (i as f64 + 0.5);
            plateaus_src.push((len, w));
        }
        v += p.value * p.duration;
    }

    let mut pieces = Vec::new();
    let mut plateaus = Vec::new();
    let mut vk = 0.0;
    for (len, w) in plateaus_src {
        let tooth = len / k as f64;
        let h = len / (k * k) as f64;
        let creep = tooth - h;
        for i in 1..=k {
            let kind = if i % 2 == 1 {
                PlateauKind::W
            } else {
                PlateauKind::Z
            };
            let (freqs, targets) = lift_targets(lambda, n, w, kind);
            let start = vk + delta_bar * h;
            let (theta, residual) =
                find_recurrence(&freqs, &targets, options.phase_tol, start, options.horizon)?;
            pieces.push(Piece::new(h, (theta - vk) / h));
            plateaus.push(LiftPlateau {
                piece: pieces.len() - 1,
                theta,
                w,
                kind,
                residual,
            });
            if creep > 0.0 {
                pieces.push(Piece::new(creep, delta_bar));
            }
            vk = theta + delta_bar * creep;
        }
    }
    let meta = serde_json::json!({
        "n": n,
        "N": big_n,
        "phase_tol": options.phase_tol,
        "subintervals": k,
        "delta_bar": delta_bar,
        "plateaus": plateaus,
    });
    let control = PiecewiseConstantControl::new(Frame::Reparametrized, delta, pieces)?
        .with_meta("lift", meta);
    Ok(Lifted { control, plateaus })
}

/// Largest congruence residual over the recorded plateaus, recomputed from
/// the control's pieces and the eigenvalues alone.
pub fn lift_congruence_residual(lifted: &Lifted, lambda: &[f64], n: usize) -> f64 {
    let pieces = lifted.control.pieces();
    let mut ends = Vec::with_capacity(pieces.len());
    let mut v = 0.0;
    for p in pieces {
        v += p.duration * p.value;
        ends.push(v);
    }
    lifted
        .plateaus
        .iter()
        .map(|pl| {
            let (freqs, targets) = lift_targets(lambda, n, pl.w, pl.kind);
            phase_residual(&freqs, &targets, ends[pl.piece])
        })
        .fold(0.0, f64::max)
}

/// `sup_t max |int_0^t offdiag(e^{-v A} B e^{v A})|` over `grid + 1` equally
/// spaced times, where `v` is the control's integrated value and the
/// off-diagonal block couples modes `< n` with modes `n..N`. Each constant
/// piece integrates in closed form:
/// `int_0^s e^{-i w (v0 + u r)} dr = s e^{-i w (v0 + u s/2)} sinc(w u s / 2)`.
pub fn decoupling_error(
    c: &PiecewiseConstantControl,
    sys: &DiscreteSpectrumSystem,
    n: usize,
    big_n: usize,
    grid: usize,
) -> Result<f64> {
    if c.frame() != Frame::Reparametrized {
        return Err(Error::InvalidControl(
            "decoupling_error expects a reparametrized-frame control".into(),
        ));
    }
    if big_n > sys.levels() || n > big_n {
        return Err(Error::OrderOutOfRange {
            order: big_n,
            min: n,
            max: sys.levels(),
        });
    }
    if n == big_n || c.is_empty() {
        return Ok(0.0);
    }
    let lambda = sys.lambda();
    let w = sys.coupling();
    let entries: Vec<(f64, f64)> = (0..n)
        .flat_map(|j| (n..big_n).map(move |l| (j, l)))
        .filter(|&(j, l)| w[(j, l)] != 0.0)
        .map(|(j, l)| (lambda[j] - lambda[l], w[(j, l)]))
        .collect();
    if entries.is_empty() {
        return Ok(0.0);
    }

    let segment = |omega: f64, v0: f64, u: f64, s: f64| -> Complex64 {
        let x = 0.5 * omega * u * s;
        let sinc = if x.abs() < 1e-8 {
            1.0 - x * x / 6.0
        } else {
            x.sin() / x
        };
        Complex64::from_polar(s * sinc, -omega * (v0 + 0.5 * u * s))
    };

    let total = c.total_duration();
    let grid = grid.max(1);
    let times: Vec<f64> = (1..=grid).map(|i| total * i as f64 / grid as f64).collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); entries.len()];
    let mut worst: f64 = 0.0;
    let mut t0 = 0.0;
    let mut v0 = 0.0;
    let mut next = 0;
    for p in c.pieces() {
        let t1 = t0 + p.duration;
        while next < times.len() && times[next] <= t1 {
            let s = times[next] - t0;
            for (a, &(omega, wjl)) in acc.iter().zip(&entries) {
                let partial = a + segment(omega, v0, p.value, s);
                worst = worst.max(wjl.abs() * partial.norm());
            }
            next += 1;
        }
        for (a, &(omega, _)) in acc.iter_mut().zip(&entries) {
            *a += segment(omega, v0, p.value, p.duration);
        }
        t0 = t1;
        v0 += p.value * p.duration;
    }
    for (a, &(_, wjl)) in acc.iter().zip(&entries) {
        worst = worst.max(wjl.abs() * a.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::custom_system;
    use nalgebra::DMatrix;

    #[test]
    fn single_congruence_solved_exactly() {
        // n = 1, N = 2, lambda = (0, 1): Z-type s = w + pi (mod 2 pi)
        let w = 0.7;
        let (freqs, targets) = lift_targets(&[0.0, 1.0], 1, w, PlateauKind::Z);
        let (s, r) = find_recurrence(&freqs, &targets, 1e-12, 0.0, 100.0).unwrap();
        assert!(r <= 1e-12);
        let m = (s - w - PI) / TAU;
        assert!((m - m.round()).abs() < 1e-12);
        assert!((s - (w + PI)).abs() < 1e-9);
    }

    #[test]
    fn recurrence_reports_failure() {
        // 1 and 2 cannot carry phases 0 and pi at the same time
        let err = find_recurrence(&[1.0, 2.0], &[0.0, PI], 0.01, 0.0, 1000.0).unwrap_err();
        assert!(matches!(err, Error::PhaseSearchFailed { .. }));
    }

    #[test]
    fn phase_correction_commensurate() {
        let pc = phase_correction(&[1.0, 2.0], 0.3, 0.5, 0.1, 1.0, 0.0, 1e4).unwrap();
        assert!(pc.phase_error < 1e-9);
        let m = pc.v2 / TAU;
        assert!((m - m.round()).abs() < 1e-10);
        assert!(pc.u > 0.5);
        assert!((pc.tau * pc.u - (0.3 + pc.v2)).abs() <= 1e-12 * pc.v2.max(1.0));
    }

    #[test]
    fn phase_correction_incommensurate() {
        let pc = phase_correction(&[1.0, 2f64.sqrt()], 0.0, 0.1, 0.1, 1.0, 2.0, 1e6).unwrap();
        assert!(pc.phase_error <= 0.05 + 1e-12);
        assert!(pc.u > 0.1);
        assert!((pc.tau - 0.025).abs() < 1e-15);
    }

    #[test]
    fn decoupling_zero_cases() {
        let w = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        let sys = custom_system(vec![0.0, 1.0, 2f64.sqrt()], w).unwrap();
        let c =
            PiecewiseConstantControl::new(Frame::Reparametrized, 0.1, vec![Piece::new(3.0, 0.5)])
                .unwrap();
        assert_eq!(decoupling_error(&c, &sys, 2, 3, 50).unwrap(), 0.0);
        assert_eq!(decoupling_error(&c, &sys, 3, 3, 50).unwrap(), 0.0);
    }

    #[test]
    fn decoupling_matches_numeric_integral() {
        let w = DMatrix::from_fn(3, 3, |j, k| 0.3 + 0.1 * (j + k) as f64);
        let sys = custom_system(vec![0.0, 1.0, 2f64.sqrt()], w).unwrap();
        let c = PiecewiseConstantControl::new(
            Frame::Reparametrized,
            0.1,
            vec![Piece::new(1.3, 0.7), Piece::new(0.4, 3.0)],
        )
        .unwrap();
        let got = decoupling_error(&c, &sys, 2, 3, 1).unwrap();
        // midpoint rule on the final integral
        let steps = 200_000;
        let total = c.total_duration();
        let mut acc = [Complex64::new(0.0, 0.0); 2];
        for i in 0..steps {
            let t = (i as f64 + 0.5) * total / steps as f64;
            let v = if t < 1.3 {
                0.7 * t
            } else {
                0.7 * 1.3 + 3.0 * (t - 1.3)
            };
            for (j, a) in acc.iter_mut().enumerate() {
                let omega = sys.lambda()[j] - sys.lambda()[2];
                *a += Complex64::from_polar(sys.coupling()[(j, 2)], -omega * v)
                    * (total / steps as f64);
            }
        }
        let want = acc.iter().map(|a| a.norm()).fold(0.0, f64::max);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}
