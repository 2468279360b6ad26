//! Seeded multi-start compass search over piecewise-constant controls in the
//! reparametrized frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{Frame, Piece, PiecewiseConstantControl};

/// Smallest log-excess `ln(u / delta)`; keeps values strictly above `delta`.
const LOG_EXCESS_MIN: f64 = 1e-9;
const DURATION_MIN: f64 = 1e-9;
const STEP_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Space {
    pub delta: f64,
    /// Values lie in `(delta, ceiling * delta]`.
    pub ceiling: f64,
    pub t_max: f64,
}

impl Space {
    fn log_max(&self) -> f64 {
        self.ceiling.ln().max(2.0 * LOG_EXCESS_MIN)
    }

    fn clamp(&self, i: usize, x: f64) -> f64 {
        if i % 2 == 0 {
            x.clamp(DURATION_MIN, self.t_max)
        } else {
            x.clamp(LOG_EXCESS_MIN, self.log_max())
        }
    }

    pub fn decode(&self, params: &[f64]) -> Vec<Piece> {
        params
            .chunks(2)
            .map(|p| Piece::new(p[0], self.delta * p[1].exp()))
            .collect()
    }

    pub fn encode(&self, pieces: &[Piece]) -> Vec<f64> {
        pieces
            .iter()
            .flat_map(|p| {
                let s = (p.value / self.delta).ln();
                [self.clamp(0, p.duration), self.clamp(1, s)]
            })
            .collect()
    }

    pub fn control(&self, params: &[f64]) -> PiecewiseConstantControl {
        PiecewiseConstantControl::new(Frame::Reparametrized, self.delta, self.decode(params))
            .expect("search space keeps pieces admissible")
    }

    fn random(&self, rng: &mut ChaCha8Rng, pieces: usize) -> Vec<f64> {
        (0..2 * pieces)
            .map(|i| {
                if i % 2 == 0 {
                    rng.random_range(0.05..1.0) * self.t_max * 0.5
                } else {
                    rng.random_range(LOG_EXCESS_MIN..self.log_max())
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub params: Vec<f64>,
    pub score: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Plan {
    pub seed: u64,
    pub budget: usize,
    pub evals_per_start: usize,
    pub batch: usize,
    pub target: f64,
}

/// Coordinate-wise pattern search with step expansion on success and
/// halving on a full sweep without improvement.
fn compass<F: Fn(&[Piece]) -> f64>(
    space: &Space,
    objective: &F,
    mut x: Vec<f64>,
    max_evals: usize,
    target: f64,
) -> Outcome {
    let mut fx = objective(&space.decode(&x));
    let mut evals = 1;
    let mut steps: Vec<f64> = (0..x.len())
        .map(|i| {
            if i % 2 == 0 {
                space.t_max / 8.0
            } else {
                space.log_max() / 8.0
            }
        })
        .collect();
    while evals < max_evals && fx > target {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let cand = space.clamp(i, x[i] + sign * steps[i]);
                if cand == x[i] {
                    continue;
                }
                let old = x[i];
                x[i] = cand;
                let f = objective(&space.decode(&x));
                evals += 1;
                if f < fx {
                    fx = f;
                    improved = true;
                    steps[i] *= 1.5;
                    break;
                }
                x[i] = old;
            }
            if evals >= max_evals || fx <= target {
                break;
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s *= 0.5);
            if steps.iter().all(|&s| s < STEP_FLOOR) {
                break;
            }
        }
    }
    Outcome {
        params: x,
        score: fx,
        evaluations: evals,
    }
}

/// Runs starts in fixed-size batches; within a batch starts run in parallel
/// and the best is chosen by `(score, start index)`, so the result does not
/// depend on the thread count.
pub(crate) fn multi_start<F: Fn(&[Piece]) -> f64 + Sync>(
    space: &Space,
    objective: &F,
    piece_counts: &[usize],
    warm: Option<Vec<f64>>,
    plan: &Plan,
) -> Outcome {
    let mut best: Option<(f64, usize, Outcome)> = None;
    let mut used = 0usize;
    let mut next_start = 0usize;
    let per_start = plan.evals_per_start.max(10);
    while used < plan.budget {
        let remaining = plan.budget - used;
        let count = plan.batch.max(1).min(remaining.div_ceil(per_start));
        let starts: Vec<usize> = (next_start..next_start + count).collect();
        next_start += count;
        let results: Vec<(usize, Outcome)> = starts
            .par_iter()
            .map(|&idx| {
                let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
                rng.set_stream(idx as u64);
                let x0 = match (&warm, idx) {
                    (Some(w), 0) => w.clone(),
                    _ => space.random(&mut rng, piece_counts[idx % piece_counts.len()]),
                };
                let evals = per_start.min(remaining);
                (idx, compass(space, objective, x0, evals, plan.target))
            })
            .collect();
        for (idx, out) in results {
            used += out.evaluations;
            let better = match &best {
                None => true,
                Some((s, i, _)) => (out.score, idx) < (*s, *i),
            };
            if better {
                best = Some((out.score, idx, out));
            }
        }
        if best.as_ref().is_some_and(|(s, _, _)| *s <= plan.target) {
            break;
        }
    }
    let (_, _, mut out) = best.expect("at least one start runs");
    out.evaluations = used;
    out
}
