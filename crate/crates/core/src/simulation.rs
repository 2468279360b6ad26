//! Exact piecewise propagation of states and density matrices, fidelities,
//! and the a priori steering-time bound.

use std::io::{self, Write};

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::Serialize;

use crate::control::{Frame, PiecewiseConstantControl};
use crate::error::{Error, Result};
use crate::linalg::{max_norm, CMatrix, CVector, SkewHermitianMatrix, SkewSpectral};
use crate::models::{DiscreteSpectrumSystem, GalerkinPair};

pub const STATE_NORM_TOL: f64 = 1e-10;
pub const DENSITY_HERMITIAN_TOL: f64 = 1e-12;
pub const DENSITY_TRACE_TOL: f64 = 1e-10;
pub const DENSITY_PSD_TOL: f64 = 1e-10;
pub const DRIFT_MARGIN_TOL: f64 = 1e-8;
pub const DEFAULT_SAMPLES_PER_PIECE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState(CVector);

impl QuantumState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("empty state".into()));
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("state amplitudes"));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::InvalidState(format!("norm {norm} is not 1")));
        }
        Ok(Self(amplitudes))
    }

    /// Scales a nonzero vector to unit norm.
    pub fn normalized(v: CVector) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        Self::new(v / Complex64::new(norm, 0.0))
    }

    /// The eigenvector `phi_k` (0-based).
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidState(format!(
                "basis index {k} outside dimension {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[k] = Complex64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Zero-padded or truncated copy in dimension `dim`. Truncation must not
    /// discard weight.
    pub fn resized(&self, dim: usize) -> Result<Self> {
        let mut v = CVector::zeros(dim);
        for (i, z) in self.0.iter().enumerate() {
            if i < dim {
                v[i] = *z;
            } else if z.norm() > STATE_NORM_TOL {
                return Err(Error::InvalidState(format!(
                    "state has weight on level {i}, beyond dimension {dim}"
                )));
            }
        }
        Self::normalized(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidState(
                "density matrix must be square and nonempty".into(),
            ));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("density matrix"));
        }
        let herm = max_norm(&(&m - m.adjoint()));
        if herm > DENSITY_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian ({herm:.3e})"
            )));
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > DENSITY_TRACE_TOL || trace.im.abs() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix trace {trace} is not 1"
            )));
        }
        let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let lowest = hermitian_eigenvalues(&m).first().cloned().unwrap_or(0.0);
        if lowest < -DENSITY_PSD_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix has eigenvalue {lowest:.3e}"
            )));
        }
        Ok(Self(m))
    }

    pub fn pure(psi: &QuantumState) -> Self {
        let v = psi.amplitudes();
        Self(v * v.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0))
    }

    /// `sum_i w_i psi_i psi_i^H` with nonnegative weights summing to one.
    pub fn mixture(weights: &[f64], states: &[QuantumState]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::InvalidState(
                "weights and states must pair up".into(),
            ));
        }
        let dim = states[0].dim();
        let mut m = CMatrix::zeros(dim, dim);
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            if *w < 0.0 {
                return Err(Error::InvalidState(format!("negative weight {w}")));
            }
            m += DensityMatrix::pure(s).0 * Complex64::new(*w, 0.0);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.0)
    }

    pub fn purity(&self) -> f64 {
        purity(&self.0)
    }
}

fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

fn purity(m: &CMatrix) -> f64 {
    // tr(rho^2) = sum |rho_jk|^2 for Hermitian rho
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Sampled state trajectory. Times are in the control's own frame.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVector>,
    pub populations: Vec<Vec<f64>>,
    /// `max |‖psi(t)‖ - 1|` over the samples; states are never renormalized.
    pub norm_drift: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &CVector {
        self.states
            .last()
            .expect("trajectory has an initial sample")
    }

    pub fn final_norm_error(&self) -> f64 {
        (self.final_state().norm() - 1.0).abs()
    }

    /// Header `t,re_0,im_0,...,pop_0,...`; every number with 17 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut header = vec!["t".to_string()];
        for k in 0..n {
            header.push(format!("re_{k}"));
            header.push(format!("im_{k}"));
        }
        header.extend((0..n).map(|k| format!("pop_{k}")));
        writeln!(w, "{}", header.join(","))?;
        for row in self.rows() {
            writeln!(
                w,
                "{}",
                row.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(",")
            )?;
        }
        Ok(())
    }

    /// Whitespace-separated columns with a commented header, for gnuplot.
    pub fn write_plot<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let pops: Vec<String> = (0..n).map(|k| format!("pop_{k}")).collect();
        writeln!(w, "# t {}", pops.join(" "))?;
        for (t, p) in self.times.iter().zip(&self.populations) {
            let cols: Vec<String> = std::iter::once(*t)
                .chain(p.iter().cloned())
                .map(fmt17)
                .collect();
            writeln!(w, "{}", cols.join(" "))?;
        }
        Ok(())
    }

    fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.times
            .iter()
            .zip(&self.states)
            .zip(&self.populations)
            .map(|((t, s), p)| {
                let mut row = vec![*t];
                for z in s.iter() {
                    row.push(z.re);
                    row.push(z.im);
                }
                row.extend_from_slice(p);
                row
            })
    }
}

#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub densities: Vec<CMatrix>,
    pub eigenvalues: Vec<Vec<f64>>,
    pub purity: Vec<f64>,
    /// Largest deviation of the sorted spectrum from the initial one.
    pub spectrum_drift: f64,
}

impl DensityTrajectory {
    pub fn final_density(&self) -> &CMatrix {
        self.densities
            .last()
            .expect("trajectory has an initial sample")
    }

    /// Header `t,eig_0,...,purity`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.eigenvalues.first().map_or(0, |e| e.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|k| format!("eig_{k}")));
        header.push("purity".into());
        writeln!(w, "{}", header.join(","))?;
        for ((t, e), p) in self.times.iter().zip(&self.eigenvalues).zip(&self.purity) {
            let row: Vec<String> = std::iter::once(*t)
                .chain(e.iter().cloned())
                .chain(std::iter::once(*p))
                .map(fmt17)
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_plot<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.eigenvalues.first().map_or(0, |e| e.len());
        let eigs: Vec<String> = (0..n).map(|k| format!("eig_{k}")).collect();
        writeln!(w, "# t {} purity", eigs.join(" "))?;
        for ((t, e), p) in self.times.iter().zip(&self.eigenvalues).zip(&self.purity) {
            let row: Vec<String> = std::iter::once(*t)
                .chain(e.iter().cloned())
                .chain(std::iter::once(*p))
                .map(fmt17)
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits, which round-trips every
/// double.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Generator of one piece: `A + uB` in the original frame, `uA + B` in the
/// reparametrized one.
pub fn piece_generator(g: &GalerkinPair, frame: Frame, value: f64) -> SkewHermitianMatrix {
    let (ca, cb) = match frame {
        Frame::Original => (1.0, value),
        Frame::Reparametrized => (value, 1.0),
    };
    SkewHermitianMatrix::combine(ca, g.a(), cb, g.b()).expect("pair has matching dimensions")
}

fn piece_spectra(g: &GalerkinPair, c: &PiecewiseConstantControl) -> Result<Vec<SkewSpectral>> {
    c.pieces()
        .iter()
        .map(|p| piece_generator(g, c.frame(), p.value).spectral())
        .collect()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Propagates `psi0` piece by piece; each piece is sampled at
/// `samples_per_piece` equally spaced times (its end point included).
pub fn propagate(
    g: &GalerkinPair,
    c: &PiecewiseConstantControl,
    psi0: &QuantumState,
    samples_per_piece: usize,
) -> Result<Trajectory> {
    check_dim(g.order(), psi0.dim())?;
    let samples = samples_per_piece.max(1);
    let spectra = piece_spectra(g, c)?;
    let mut times = vec![0.0];
    let mut states = vec![psi0.amplitudes().clone()];
    let mut t0 = 0.0;
    let mut psi = psi0.amplitudes().clone();
    for (piece, spec) in c.pieces().iter().zip(&spectra) {
        for s in 1..=samples {
            let dt = piece.duration * s as f64 / samples as f64;
            let x = spec.apply(dt, &psi);
            times.push(t0 + dt);
            states.push(x);
        }
        psi = states.last().unwrap().clone();
        t0 += piece.duration;
    }
    let populations: Vec<Vec<f64>> = states
        .iter()
        .map(|s| s.iter().map(|z| z.norm_sqr()).collect())
        .collect();
    let norm_drift = states
        .iter()
        .map(|s| (s.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(Trajectory {
        times,
        states,
        populations,
        norm_drift,
    })
}

/// The final state only.
pub fn final_state(
    g: &GalerkinPair,
    c: &PiecewiseConstantControl,
    psi0: &CVector,
) -> Result<CVector> {
    check_dim(g.order(), psi0.len())?;
    let mut psi = psi0.clone();
    for p in c.pieces() {
        psi = piece_generator(g, c.frame(), p.value)
            .spectral()?
            .apply(p.duration, &psi);
    }
    Ok(psi)
}

/// Product of the piece propagators, last piece leftmost.
pub fn propagator(g: &GalerkinPair, c: &PiecewiseConstantControl) -> Result<CMatrix> {
    let n = g.order();
    let mut u = CMatrix::identity(n, n);
    for p in c.pieces() {
        u = piece_generator(g, c.frame(), p.value)
            .spectral()?
            .exp(p.duration)
            * u;
    }
    Ok(u)
}

/// `|<phi, psi>|^2`.
pub fn fidelity(psi: &QuantumState, phi: &QuantumState) -> Result<f64> {
    check_dim(psi.dim(), phi.dim())?;
    Ok(overlap_sqr(psi.amplitudes(), phi.amplitudes()))
}

pub(crate) fn overlap_sqr(psi: &CVector, phi: &CVector) -> f64 {
    phi.dotc(psi).norm_sqr().min(1.0)
}

/// `rho -> U rho U^H` with the same propagators as [`propagate`].
pub fn propagate_density(
    g: &GalerkinPair,
    c: &PiecewiseConstantControl,
    rho0: &DensityMatrix,
    samples_per_piece: usize,
) -> Result<DensityTrajectory> {
    check_dim(g.order(), rho0.dim())?;
    let samples = samples_per_piece.max(1);
    let spectra = piece_spectra(g, c)?;
    let mut times = vec![0.0];
    let mut densities = vec![rho0.matrix().clone()];
    let mut t0 = 0.0;
    let mut rho = rho0.matrix().clone();
    for (piece, spec) in c.pieces().iter().zip(&spectra) {
        for s in 1..=samples {
            let dt = piece.duration * s as f64 / samples as f64;
            let u = spec.exp(dt);
            let next = &u * &rho * u.adjoint();
            times.push(t0 + dt);
            densities.push((&next + next.adjoint()) * Complex64::new(0.5, 0.0));
        }
        rho = densities.last().unwrap().clone();
        t0 += piece.duration;
    }
    let eigenvalues: Vec<Vec<f64>> = densities.iter().map(hermitian_eigenvalues).collect();
    let purity = densities.iter().map(purity).collect();
    let spectrum_drift = eigenvalues
        .iter()
        .map(|e| {
            e.iter()
                .zip(&eigenvalues[0])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(DensityTrajectory {
        times,
        densities,
        eigenvalues,
        purity,
        spectrum_drift,
    })
}

/// Lower bound on the duration of any original-frame control with values in
/// `(0, delta)` that steers `psi0` to within `eps` of `psi1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringTimeBound {
    /// `+inf` when a zero column has a positive numerator.
    pub value: f64,
    /// Level attaining the supremum, if any numerator was positive.
    pub level: Option<usize>,
}

impl Serialize for SteeringTimeBound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            value: Option<f64>,
            unbounded: bool,
            level: Option<usize>,
            column_norms: &'static str,
        }
        Repr {
            value: self.value.is_finite().then_some(self.value),
            unbounded: self.value.is_infinite(),
            level: self.level,
            column_norms: "stored coupling columns (truncation surrogate)",
        }
        .serialize(s)
    }
}

/// `(1/delta) sup_k (| |psi0_k| - |psi1_k| | - eps) / |W col_k|`, clamped at
/// zero. Columns come from the stored coupling matrix; states shorter than
/// the stored levels are zero-padded.
pub fn steering_time_lower_bound(
    sys: &DiscreteSpectrumSystem,
    psi0: &QuantumState,
    psi1: &QuantumState,
    eps: f64,
    delta: f64,
) -> Result<SteeringTimeBound> {
    if !(eps >= 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need eps >= 0 and delta > 0, got eps = {eps}, delta = {delta}"
        )));
    }
    let levels = sys.levels();
    check_dim(psi0.dim(), psi1.dim())?;
    if psi0.dim() > levels {
        return Err(Error::DimensionMismatch {
            expected: levels,
            found: psi0.dim(),
        });
    }
    let mut best = 0.0;
    let mut level = None;
    for k in 0..psi0.dim() {
        let numer = (psi0.amplitudes()[k].norm() - psi1.amplitudes()[k].norm()).abs() - eps;
        if numer <= 0.0 {
            continue;
        }
        let col = sys.column_norm(k);
        let ratio = if col == 0.0 {
            f64::INFINITY
        } else {
            numer / col
        };
        if ratio > best {
            best = ratio;
            level = Some(k);
        }
    }
    Ok(SteeringTimeBound {
        value: best / delta,
        level,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftCheck {
    pub ok: bool,
    pub worst_margin: f64,
    pub worst_level: usize,
    pub margins: Vec<f64>,
    /// Reparametrized-frame duration `T_nu` used in the inequality.
    pub duration: f64,
}

/// `T ‖B col_k‖ - | |psi0_k| - |psiT_k| |` for every level.
pub fn drift_margins(
    duration: f64,
    column_norms: &[f64],
    psi0: &CVector,
    psi_t: &CVector,
) -> Vec<f64> {
    column_norms
        .iter()
        .zip(psi0.iter().zip(psi_t.iter()))
        .map(|(c, (a, b))| duration * c - (a.norm() - b.norm()).abs())
        .collect()
}

pub fn check_margins(duration: f64, margins: Vec<f64>) -> DriftCheck {
    let (worst_level, worst_margin) =
        margins
            .iter()
            .cloned()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (k, m)| if m < acc.1 { (k, m) } else { acc },
            );
    DriftCheck {
        ok: worst_margin >= -DRIFT_MARGIN_TOL,
        worst_margin,
        worst_level,
        margins,
        duration,
    }
}

/// Checks that no coordinate modulus moved faster than `‖B col_k‖` per unit
/// of reparametrized time. Original-frame controls are measured by their
/// integrated value, which is the same quantity.
pub fn modulus_drift_check(
    g: &GalerkinPair,
    c: &PiecewiseConstantControl,
    psi0: &QuantumState,
) -> Result<DriftCheck> {
    let psi_t = final_state(g, c, psi0.amplitudes())?;
    let duration = c.reparametrized_duration();
    let margins = drift_margins(duration, &g.column_norms(), psi0.amplitudes(), &psi_t);
    Ok(check_margins(duration, margins))
}
