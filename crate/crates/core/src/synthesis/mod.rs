//! Control synthesis: direct search for finite-dimensional state and unitary
//! transfers, the oscillating lift across truncation orders, and the final
//! phase correction.

mod lift;
mod search;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use crate::control::reparametrize;
pub use lift::{
    circle_distance, decoupling_error, find_recurrence, lift_congruence_residual, lift_control,
    phase_correction, phase_coupling_bound, phase_residual, LiftOptions, LiftPlateau, Lifted,
    PhaseCorrection, PlateauKind,
};

use crate::certification::connectedness;
use crate::control::{Frame, Piece, PiecewiseConstantControl};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, UnitaryMatrix};
use crate::models::{DiscreteSpectrumSystem, GalerkinPair};
use crate::simulation::{final_state, overlap_sqr, piece_generator, QuantumState};
use search::{multi_start, Plan, Space};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SteerOptions {
    pub delta: f64,
    pub tol: f64,
    /// Total objective evaluations across all starts.
    pub budget: usize,
    pub seed: u64,
    pub evals_per_start: usize,
    /// Starts run concurrently per batch.
    pub batch: usize,
    /// Values are searched in `(delta, ceiling * delta]`.
    pub ceiling: f64,
}

impl Default for SteerOptions {
    fn default() -> Self {
        Self {
            delta: 0.1,
            tol: 1e-3,
            budget: 200_000,
            seed: 0,
            evals_per_start: 4_000,
            batch: 8,
            ceiling: 1e3,
        }
    }
}

impl SteerOptions {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be non-negative, got {}",
                self.tol
            )));
        }
        if !(self.ceiling > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ceiling must exceed 1, got {}",
                self.ceiling
            )));
        }
        if self.budget == 0 {
            return Err(Error::InvalidParameter("budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SteerResult {
    /// Reparametrized frame; `meta.status` is `converged` or `unconverged`.
    pub control: PiecewiseConstantControl,
    pub infidelity: f64,
    pub converged: bool,
    pub evaluations: usize,
}

fn piece_counts(n: usize) -> Vec<usize> {
    let mut counts = Vec::new();
    for c in [1, n, 2 * n, n * n, 2 * n * n] {
        if !counts.contains(&c) {
            counts.push(c);
        }
    }
    counts
}

fn space_for(g: &GalerkinPair, opts: &SteerOptions) -> Space {
    let bnorm = g.b().frobenius_norm();
    let t_max = if bnorm > 0.0 {
        4.0 * PI / bnorm
    } else {
        4.0 * PI
    };
    Space {
        delta: opts.delta,
        ceiling: opts.ceiling,
        t_max,
    }
}

fn tagged(
    c: PiecewiseConstantControl,
    converged: bool,
    residual_key: &str,
    residual: f64,
    opts: &SteerOptions,
) -> PiecewiseConstantControl {
    c.with_meta(
        "status",
        serde_json::json!(if converged {
            "converged"
        } else {
            "unconverged"
        }),
    )
    .with_meta(residual_key, serde_json::json!(residual))
    .with_meta("seed", serde_json::json!(opts.seed))
}

fn state_infidelity(
    g: &GalerkinPair,
    frame: Frame,
    pieces: &[Piece],
    x0: &CVector,
    x1: &CVector,
) -> f64 {
    let mut psi = x0.clone();
    for p in pieces {
        match piece_generator(g, frame, p.value).spectral() {
            Ok(s) => psi = s.apply(p.duration, &psi),
            Err(_) => return f64::INFINITY,
        }
    }
    (1.0 - overlap_sqr(x1, &psi)).max(0.0)
}

fn steer_state_inner(
    g: &GalerkinPair,
    x0: &QuantumState,
    x1: &QuantumState,
    opts: &SteerOptions,
    warm: Option<&PiecewiseConstantControl>,
) -> Result<SteerResult> {
    opts.validate()?;
    let n = g.order();
    for x in [x0, x1] {
        if x.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.dim(),
            });
        }
    }
    let (a0, a1) = (x0.amplitudes(), x1.amplitudes());
    let initial = (1.0 - overlap_sqr(a1, a0)).max(0.0);
    if initial <= opts.tol {
        let c = PiecewiseConstantControl::empty(Frame::Reparametrized, opts.delta)?;
        return Ok(SteerResult {
            control: tagged(c, true, "infidelity", initial, opts),
            infidelity: initial,
            converged: true,
            evaluations: 0,
        });
    }
    if !connectedness(g.coupling()).connected {
        log::warn!("coupling at order {n} is not connected; the transfer may be unreachable");
    }
    let space = space_for(g, opts);
    let warm_params = match warm {
        Some(c) if c.frame() == Frame::Reparametrized && !c.is_empty() => {
            Some(space.encode(c.pieces()))
        }
        _ => None,
    };
    let plan = Plan {
        seed: opts.seed,
        budget: opts.budget,
        evals_per_start: opts.evals_per_start,
        batch: opts.batch,
        target: opts.tol,
    };
    let objective = |pieces: &[Piece]| state_infidelity(g, Frame::Reparametrized, pieces, a0, a1);
    let out = multi_start(&space, &objective, &piece_counts(n), warm_params, &plan);
    let control = space.control(&out.params);
    // re-evaluate through the public propagation path
    let infidelity = (1.0 - overlap_sqr(a1, &final_state(g, &control, a0)?)).max(0.0);
    let converged = infidelity <= opts.tol;
    Ok(SteerResult {
        control: tagged(control, converged, "infidelity", infidelity, opts),
        infidelity,
        converged,
        evaluations: out.evaluations,
    })
}

/// Searches a reparametrized-frame control whose propagator maps `x0` to
/// `x1` up to a global phase, with infidelity `1 - |<x1, x(T)>|^2 <= tol`.
/// Returns the best control found (tagged `unconverged`) when the budget
/// runs out first.
pub fn steer_state(
    g: &GalerkinPair,
    x0: &QuantumState,
    x1: &QuantumState,
    opts: &SteerOptions,
) -> Result<SteerResult> {
    steer_state_inner(g, x0, x1, opts, None)
}

/// As [`steer_state`], seeding the first start with `warm`.
pub fn steer_state_from(
    g: &GalerkinPair,
    x0: &QuantumState,
    x1: &QuantumState,
    opts: &SteerOptions,
    warm: &PiecewiseConstantControl,
) -> Result<SteerResult> {
    steer_state_inner(g, x0, x1, opts, Some(warm))
}

#[derive(Debug, Clone)]
pub struct StateSynthesis {
    pub control: PiecewiseConstantControl,
    pub order: usize,
    pub verify_order: usize,
    /// Infidelity at `order` of the first search.
    pub infidelity_at_order: f64,
    /// Infidelity of the returned control at `verify_order`.
    pub infidelity: f64,
    pub converged: bool,
    pub refined: bool,
    pub evaluations: usize,
}

/// Steers at order `n`, re-checks the control at `verify_order` with the
/// states padded by zeros, and if that check fails continues the search at
/// `verify_order` from the order-`n` control.
pub fn synthesize_state(
    sys: &DiscreteSpectrumSystem,
    n: usize,
    verify_order: usize,
    x0: &QuantumState,
    x1: &QuantumState,
    opts: &SteerOptions,
) -> Result<StateSynthesis> {
    if verify_order < n || verify_order > sys.levels() {
        return Err(Error::OrderOutOfRange {
            order: verify_order,
            min: n,
            max: sys.levels(),
        });
    }
    let g = sys.truncate(n)?;
    let first = steer_state(&g, &x0.resized(n)?, &x1.resized(n)?, opts)?;
    let gv = sys.truncate(verify_order)?;
    let (y0, y1) = (x0.resized(verify_order)?, x1.resized(verify_order)?);
    let check = |c: &PiecewiseConstantControl| -> Result<f64> {
        Ok((1.0 - overlap_sqr(y1.amplitudes(), &final_state(&gv, c, y0.amplitudes())?)).max(0.0))
    };
    let verified = check(&first.control)?;
    if verified <= opts.tol || verify_order == n {
        let control = first
            .control
            .with_meta("verify_order", serde_json::json!(verify_order))
            .with_meta("verified_infidelity", serde_json::json!(verified));
        return Ok(StateSynthesis {
            control,
            order: n,
            verify_order,
            infidelity_at_order: first.infidelity,
            infidelity: verified,
            converged: verified <= opts.tol,
            refined: false,
            evaluations: first.evaluations,
        });
    }
    let second = steer_state_from(&gv, &y0, &y1, opts, &first.control)?;
    let control = second
        .control
        .with_meta("verify_order", serde_json::json!(verify_order))
        .with_meta("verified_infidelity", serde_json::json!(second.infidelity));
    Ok(StateSynthesis {
        control,
        order: n,
        verify_order,
        infidelity_at_order: first.infidelity,
        infidelity: second.infidelity,
        converged: second.converged,
        refined: true,
        evaluations: first.evaluations + second.evaluations,
    })
}

#[derive(Debug, Clone)]
pub struct UnitarySteer {
    pub control: PiecewiseConstantControl,
    /// Global phase in `[0, 2 pi / n]`.
    pub theta: f64,
    /// `|| e^{i theta} U g0 - g1 ||_F`.
    pub distance: f64,
    pub converged: bool,
    pub evaluations: usize,
}

fn is_traceless(g: &GalerkinPair) -> bool {
    let scale = g.a().frobenius_norm().max(g.b().frobenius_norm()).max(1.0);
    g.a().trace().norm() <= 1e-12 * scale && g.b().trace().norm() <= 1e-12 * scale
}

/// Nearest point of `[0, hi]` on the circle.
fn clamp_on_circle(theta: f64, hi: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t <= hi {
        return t;
    }
    if circle_distance(t - hi) <= circle_distance(t) {
        hi
    } else {
        0.0
    }
}

enum PhaseRule {
    Free { hi: f64 },
    Fixed(f64),
}

impl PhaseRule {
    fn theta(&self, overlap: Complex64) -> f64 {
        match *self {
            PhaseRule::Free { hi } => clamp_on_circle(overlap.arg(), hi),
            PhaseRule::Fixed(t) => t,
        }
    }

    fn distance(&self, n: usize, overlap: Complex64) -> (f64, f64) {
        let theta = self.theta(overlap);
        let re = (Complex64::from_polar(1.0, -theta) * overlap).re;
        (theta, (2.0 * n as f64 - 2.0 * re).max(0.0).sqrt())
    }
}

fn unitary_overlap(
    g: &GalerkinPair,
    pieces: &[Piece],
    g0: &CMatrix,
    g1: &CMatrix,
) -> Option<Complex64> {
    let mut m = g0.clone();
    for p in pieces {
        m = piece_generator(g, Frame::Reparametrized, p.value)
            .spectral()
            .ok()?
            .exp(p.duration)
            * m;
    }
    Some((m.adjoint() * g1).trace())
}

/// Searches a reparametrized-frame control with `e^{i theta} U g0` close to
/// `g1` in Frobenius norm. The phase is optimal in closed form, restricted to
/// `[0, 2 pi / n]`; when `A` and `B` are traceless the propagator has unit
/// determinant and the phase is pinned to `theta = t / n` with
/// `e^{i t} = det g1 / det g0`.
pub fn steer_unitary(
    g: &GalerkinPair,
    g0: &UnitaryMatrix,
    g1: &UnitaryMatrix,
    opts: &SteerOptions,
) -> Result<UnitarySteer> {
    opts.validate()?;
    let n = g.order();
    for u in [g0, g1] {
        if u.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.dim(),
            });
        }
    }
    let hi = TAU / n as f64;
    let rule = if is_traceless(g) {
        let ratio = g1.determinant() / g0.determinant();
        let t = ratio.arg().rem_euclid(TAU);
        PhaseRule::Fixed(if t >= TAU { 0.0 } else { t / n as f64 })
    } else {
        PhaseRule::Free { hi }
    };
    let (m0, m1) = (g0.matrix(), g1.matrix());

    let identical = (m1 - m0).iter().map(|z| z.norm()).fold(0.0, f64::max) <= 1e-12;
    let (theta0, dist0) = rule.distance(n, (m0.adjoint() * m1).trace());
    if identical || dist0 <= opts.tol {
        let theta = if identical { 0.0 } else { theta0 };
        let dist = if identical { 0.0 } else { dist0 };
        let c = PiecewiseConstantControl::empty(Frame::Reparametrized, opts.delta)?;
        return Ok(UnitarySteer {
            control: tagged(c, true, "distance", dist, opts)
                .with_meta("theta", serde_json::json!(theta)),
            theta,
            distance: dist,
            converged: true,
            evaluations: 0,
        });
    }

    let space = space_for(g, opts);
    let plan = Plan {
        seed: opts.seed,
        budget: opts.budget,
        evals_per_start: opts.evals_per_start,
        batch: opts.batch,
        target: opts.tol * opts.tol,
    };
    let objective = |pieces: &[Piece]| match unitary_overlap(g, pieces, m0, m1) {
        Some(z) => {
            let d = rule.distance(n, z).1;
            d * d
        }
        None => f64::INFINITY,
    };
    let out = multi_start(&space, &objective, &piece_counts(n), None, &plan);
    let control = space.control(&out.params);
    let overlap =
        unitary_overlap(g, control.pieces(), m0, m1).ok_or(Error::EigenNonConvergence {
            dim: n,
            norm: g.b().frobenius_norm(),
        })?;
    let (theta, distance) = rule.distance(n, overlap);
    let converged = distance <= opts.tol;
    Ok(UnitarySteer {
        control: tagged(control, converged, "distance", distance, opts)
            .with_meta("theta", serde_json::json!(theta)),
        theta,
        distance,
        converged,
        evaluations: out.evaluations,
    })
}
