use std::fs;

use bqc_core::certification::{certify, CertificationReport, Overall};
use bqc_core::control::{Frame, PiecewiseConstantControl};
use bqc_core::models::ModelMeta;
use bqc_core::simulation::{
    modulus_drift_check, propagate, propagate_density, steering_time_lower_bound, DriftCheck,
    SteeringTimeBound, DEFAULT_SAMPLES_PER_PIECE,
};
use bqc_core::synthesis::{synthesize_state, SteerOptions};
use bqc_core::Error;
use serde::Serialize;

use crate::config::{section, Loaded};
use crate::output::{OutDir, Report};
use crate::{Failure, Flags};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUTED: i32 = 2;
pub const EXIT_UNCONVERGED: i32 = 3;

/// Library errors caused by the inputs are configuration errors; the rest
/// are numerical failures.
fn classify(e: Error) -> Failure {
    match e {
        Error::DimensionMismatch { .. }
        | Error::InvalidParameter(_)
        | Error::OrderOutOfRange { .. }
        | Error::AsymmetricCoupling { .. }
        | Error::NonFinite(_)
        | Error::DegenerateSpectrum(_)
        | Error::InvalidState(_)
        | Error::InvalidControl(_)
        | Error::NotSkewHermitian { .. }
        | Error::NotUnitary { .. }
        | Error::Json(_) => Failure::Config(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    }
}

pub fn certify_cmd(cfg: &Loaded, flags: &Flags, out: &OutDir) -> Result<i32, Failure> {
    let sys = cfg.system()?;
    let (n, opts) = cfg.certify_options();
    let n = n.unwrap_or(sys.levels());
    let report = certify(&sys, n, &opts).map_err(classify)?;
    let code = if report.overall == Overall::Refuted {
        EXIT_REFUTED
    } else {
        EXIT_OK
    };
    out.write_json(
        "report.json",
        &Report::new("certify", flags.seed, code, report),
    )?;
    Ok(code)
}

#[derive(Serialize)]
struct SynthesisSummary {
    order: usize,
    verify_order: usize,
    delta: f64,
    tol: f64,
    converged: bool,
    refined: bool,
    infidelity: f64,
    infidelity_at_order: f64,
    evaluations: usize,
    pieces: usize,
    total_duration: f64,
    certification: Option<Overall>,
    control_file: &'static str,
}

pub fn synthesize_cmd(cfg: &Loaded, flags: &Flags, out: &OutDir) -> Result<i32, Failure> {
    let sys = cfg.system()?;
    let s = section(&cfg.config.synthesize, "synthesize")?;
    let n = s.n.unwrap_or(2);
    let verify_order = s.verify_order.unwrap_or((2 * n).min(sys.levels()));
    let seed = flags.seed.or(s.seed).unwrap_or(0);
    let defaults = SteerOptions::default();
    let opts = SteerOptions {
        delta: s.delta.unwrap_or(defaults.delta),
        tol: s.tol.unwrap_or(defaults.tol),
        budget: s.budget.unwrap_or(defaults.budget),
        seed,
        ..defaults
    };
    let x0 = s.from.resolve(verify_order)?;
    let x1 = s.to.resolve(verify_order)?;

    let (cert_n, cert_opts) = cfg.certify_options();
    let certification = match certify(&sys, cert_n.unwrap_or(n), &cert_opts) {
        Ok(CertificationReport { overall, .. }) => {
            if overall == Overall::Refuted {
                log::warn!("controllability at order {n} is refuted; synthesis may not converge");
            }
            Some(overall)
        }
        Err(e) => {
            log::warn!("certification at order {n} skipped: {e}");
            None
        }
    };

    let result = synthesize_state(&sys, n, verify_order, &x0, &x1, &opts).map_err(classify)?;
    out.write_with("control.json", |w| {
        writeln!(
            w,
            "{}",
            result.control.to_json().map_err(std::io::Error::other)?
        )
    })?;
    let code = if result.converged {
        EXIT_OK
    } else {
        EXIT_UNCONVERGED
    };
    let summary = SynthesisSummary {
        order: n,
        verify_order,
        delta: opts.delta,
        tol: opts.tol,
        converged: result.converged,
        refined: result.refined,
        infidelity: result.infidelity,
        infidelity_at_order: result.infidelity_at_order,
        evaluations: result.evaluations,
        pieces: result.control.len(),
        total_duration: result.control.total_duration(),
        certification,
        control_file: "control.json",
    };
    out.write_json(
        "report.json",
        &Report::new("synthesize", Some(seed), code, summary),
    )?;
    Ok(code)
}

#[derive(Serialize)]
struct StateRun {
    order: usize,
    samples_per_piece: usize,
    frame: Frame,
    pieces: usize,
    total_duration: f64,
    final_norm_error: f64,
    norm_drift: f64,
    /// `|<target, psi(T)>|^2`, when a target is given.
    fidelity: Option<f64>,
    /// `|target - psi(T)|`, phase sensitive.
    distance: Option<f64>,
    drift_check: DriftCheck,
    trajectory_file: &'static str,
}

#[derive(Serialize)]
struct DensityRun {
    order: usize,
    samples_per_piece: usize,
    frame: Frame,
    pieces: usize,
    total_duration: f64,
    spectrum_drift: f64,
    purity_initial: f64,
    purity_final: f64,
    /// `<target| rho(T) |target>`, when a target is given.
    fidelity: Option<f64>,
    trajectory_file: &'static str,
}

pub fn simulate_cmd(cfg: &Loaded, flags: &Flags, out: &OutDir) -> Result<i32, Failure> {
    let sys = cfg.system()?;
    let s = section(&cfg.config.simulate, "simulate")?;
    let order = s.order.unwrap_or(sys.levels());
    let g = sys.truncate(order).map_err(classify)?;
    let path = cfg.resolve_path(&s.control)?;
    let text = fs::read_to_string(&path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let control = PiecewiseConstantControl::from_json(&text)
        .map_err(|e| Failure::Config(format!("control {}: {e}", path.display())))?;
    let samples = s.samples.unwrap_or(DEFAULT_SAMPLES_PER_PIECE);
    let target = s.target.as_ref().map(|t| t.resolve(order)).transpose()?;

    let result = match (&s.state, &s.density) {
        (Some(state), None) => {
            let psi0 = state.resolve(order)?;
            let traj = propagate(&g, &control, &psi0, samples).map_err(classify)?;
            out.write_with("trajectory.csv", |w| traj.write_csv(w))?;
            if flags.plot {
                out.write_with("trajectory.dat", |w| traj.write_plot(w))?;
            }
            let last = traj.final_state();
            let drift_check = modulus_drift_check(&g, &control, &psi0).map_err(classify)?;
            serde_json::to_value(StateRun {
                order,
                samples_per_piece: samples,
                frame: control.frame(),
                pieces: control.len(),
                total_duration: control.total_duration(),
                final_norm_error: traj.final_norm_error(),
                norm_drift: traj.norm_drift,
                fidelity: target
                    .as_ref()
                    .map(|t| t.amplitudes().dotc(last).norm_sqr()),
                distance: target.as_ref().map(|t| (t.amplitudes() - last).norm()),
                drift_check,
                trajectory_file: "trajectory.csv",
            })
        }
        (None, Some(density)) => {
            let rho0 = density.resolve(order)?;
            let traj = propagate_density(&g, &control, &rho0, samples).map_err(classify)?;
            out.write_with("trajectory.csv", |w| traj.write_csv(w))?;
            if flags.plot {
                out.write_with("trajectory.dat", |w| traj.write_plot(w))?;
            }
            let rho = traj.final_density();
            serde_json::to_value(DensityRun {
                order,
                samples_per_piece: samples,
                frame: control.frame(),
                pieces: control.len(),
                total_duration: control.total_duration(),
                spectrum_drift: traj.spectrum_drift,
                purity_initial: traj.purity[0],
                purity_final: *traj.purity.last().expect("initial sample"),
                fidelity: target
                    .as_ref()
                    .map(|t| t.amplitudes().dotc(&(rho * t.amplitudes())).re),
                trajectory_file: "trajectory.csv",
            })
        }
        _ => {
            return Err(Failure::Config(
                "simulate needs exactly one of `state` and `density`".into(),
            ))
        }
    }
    .map_err(|e| Failure::Runtime(e.to_string()))?;
    out.write_json(
        "report.json",
        &Report::new("simulate", flags.seed, EXIT_OK, result),
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BoundSummary {
    eps: f64,
    delta: f64,
    levels: usize,
    bound: SteeringTimeBound,
}

pub fn bound_cmd(cfg: &Loaded, flags: &Flags, out: &OutDir) -> Result<i32, Failure> {
    let sys = cfg.system()?;
    let s = section(&cfg.config.bound, "bound")?;
    let levels = sys.levels();
    let psi0 = s.from.resolve(levels)?;
    let psi1 = s.to.resolve(levels)?;
    let bound = steering_time_lower_bound(&sys, &psi0, &psi1, s.eps, s.delta).map_err(classify)?;
    let summary = BoundSummary {
        eps: s.eps,
        delta: s.delta,
        levels,
        bound,
    };
    out.write_json(
        "report.json",
        &Report::new("bound", flags.seed, EXIT_OK, summary),
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ModelSummary<'a> {
    levels: usize,
    meta: &'a ModelMeta,
    system_file: &'static str,
}

pub fn model_cmd(cfg: &Loaded, flags: &Flags, out: &OutDir) -> Result<i32, Failure> {
    let sys = cfg.system()?;
    let text = sys.to_json().map_err(classify)?;
    out.write_with("system.json", |w| writeln!(w, "{text}"))?;
    let summary = ModelSummary {
        levels: sys.levels(),
        meta: sys.meta(),
        system_file: "system.json",
    };
    out.write_json(
        "report.json",
        &Report::new("model", flags.seed, EXIT_OK, summary),
    )?;
    Ok(EXIT_OK)
}
