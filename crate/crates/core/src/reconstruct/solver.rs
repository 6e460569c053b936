//! Accelerated projected gradient ascent of the count-weighted
//! log-likelihood over `{x_j ⪰ 0, Σ_j Tr x_j = 1}`.

use num_complex::Complex64;

use super::model::MeasurementMap;
use super::SolverConfig;
use crate::linalg::{self, CMatrix};

/// Floor applied to probabilities inside the logarithm.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Count weights `n_{k,s} / N_max`.
pub(crate) fn count_weights(counts: &[Vec<u64>]) -> Vec<Vec<f64>> {
    let n_max = counts
        .iter()
        .map(|c| c.iter().sum::<u64>())
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    counts
        .iter()
        .map(|c| c.iter().map(|&x| x as f64 / n_max).collect())
        .collect()
}

pub(crate) fn log_likelihood_from_probabilities(weights: &[Vec<f64>], probs: &[Vec<f64>]) -> f64 {
    weights
        .iter()
        .zip(probs)
        .map(|(w, p)| {
            w.iter()
                .zip(p)
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, p)| w * p.max(PROBABILITY_FLOOR).ln())
                .sum::<f64>()
        })
        .sum()
}

/// Likelihood value, gradient and outcome probabilities at `x`.
pub(crate) struct Evaluation {
    pub value: f64,
    pub gradient: Vec<CMatrix>,
    pub probabilities: Vec<Vec<f64>>,
    /// Every observed outcome has a probability above the floor.
    pub feasible: bool,
}

pub(crate) fn evaluate(map: &dyn MeasurementMap, weights: &[Vec<f64>], x: &[CMatrix]) -> Evaluation {
    let probabilities = map.probabilities(x);
    let value = log_likelihood_from_probabilities(weights, &probabilities);
    let mut feasible = true;
    let ratios: Vec<Vec<f64>> = weights
        .iter()
        .zip(&probabilities)
        .map(|(w, p)| {
            w.iter()
                .zip(p)
                .map(|(&w, &p)| {
                    if w > 0.0 {
                        if p <= PROBABILITY_FLOOR {
                            feasible = false;
                        }
                        w / p.max(PROBABILITY_FLOOR)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    // The gradient equals μ·1 on the support at the optimum, with μ the
    // total weight. Removing that component changes neither projected
    // steps nor the model along feasible directions, but keeps it out of
    // the round-off.
    let mu: f64 = weights.iter().flatten().sum();
    let mut gradient = map.adjoint(&ratios);
    for g in &mut gradient {
        for i in 0..g.nrows() {
            g[(i, i)].re -= mu;
        }
    }
    Evaluation {
        value,
        gradient,
        probabilities,
        feasible,
    }
}

/// Restores the identity component removed in [`evaluate`].
pub(crate) fn unshift_gradient(mut gradient: Vec<CMatrix>, weights: &[Vec<f64>]) -> Vec<CMatrix> {
    let mu: f64 = weights.iter().flatten().sum();
    for g in &mut gradient {
        for i in 0..g.nrows() {
            g[(i, i)].re += mu;
        }
    }
    gradient
}

/// `d` with its trace spread evenly over the diagonal and removed.
fn trace_free(d: &[CMatrix]) -> Vec<CMatrix> {
    let total_dim: usize = d.iter().map(|b| b.nrows()).sum();
    let drift = d.iter().map(linalg::trace_re).sum::<f64>() / total_dim as f64;
    d.iter()
        .map(|b| {
            let mut b = b.clone();
            for i in 0..b.nrows() {
                b[(i, i)].re -= drift;
            }
            b
        })
        .collect()
}

/// Likelihood difference `L(base + d) - L(base)` for a trace-free step
/// `d`, summed term by term as `w log(1 + Δp/p)` with `Δp` taken from `d`
/// itself, so it stays accurate when the step is tiny.
pub(crate) fn likelihood_gain(
    map: &dyn MeasurementMap,
    weights: &[Vec<f64>],
    base: &[Vec<f64>],
    d: &[CMatrix],
) -> f64 {
    let d = trace_free(d);
    let delta = map.probabilities(&d);
    let mut acc = 0.0;
    for ((w, dp), p) in weights.iter().zip(&delta).zip(base) {
        for ((&w, &dp), &p) in w.iter().zip(dp).zip(p) {
            if w == 0.0 {
                continue;
            }
            let p = p.max(PROBABILITY_FLOOR);
            acc += w * (dp / p).max(-1.0).ln_1p();
        }
    }
    acc
}

/// Frobenius projection onto `{x_j ⪰ 0, Σ_j Tr x_j = 1}`: joint
/// eigendecomposition, simplex projection of the pooled spectrum.
pub fn project_to_states(blocks: &[CMatrix]) -> Vec<CMatrix> {
    let eig: Vec<(Vec<f64>, CMatrix)> = blocks.iter().map(linalg::eigh).collect();
    let pooled: Vec<f64> = eig.iter().flat_map(|(v, _)| v.iter().copied()).collect();
    let projected = linalg::project_simplex(&pooled);
    let mut offset = 0;
    eig.iter()
        .map(|(vals, vecs)| {
            let part = &projected[offset..offset + vals.len()];
            offset += vals.len();
            if vals.is_empty() {
                vecs.clone()
            } else {
                linalg::hermitian_part(&linalg::from_eigen(part, vecs))
            }
        })
        .collect()
}

fn axpy(x: &[CMatrix], a: f64, d: &[CMatrix]) -> Vec<CMatrix> {
    x.iter()
        .zip(d)
        .map(|(x, d)| x + d * Complex64::new(a, 0.0))
        .collect()
}

fn diff(a: &[CMatrix], b: &[CMatrix]) -> Vec<CMatrix> {
    a.iter().zip(b).map(|(a, b)| a - b).collect()
}

fn inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter().zip(b).map(|(a, b)| linalg::inner_re(a, b)).sum()
}

fn norm(a: &[CMatrix]) -> f64 {
    inner(a, a).sqrt()
}

/// `‖x - Π(x + ∇L(x))‖`, zero exactly at the constrained maximum.
pub(crate) fn optimality_residual(
    map: &dyn MeasurementMap,
    weights: &[Vec<f64>],
    x: &[CMatrix],
) -> f64 {
    let grad = evaluate(map, weights, x).gradient;
    let moved = project_to_states(&axpy(x, 1.0, &grad));
    norm(&diff(x, &moved))
}

pub(crate) struct SolverOutcome {
    pub x: Vec<CMatrix>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub trace: Vec<f64>,
}

/// Iterations of small relative change required before stopping.
const STALL_WINDOW: usize = 10;
/// Residual below which the solver stops immediately.
const RESIDUAL_STOP: f64 = 1e-8;
/// Residual required for a run to count as converged.
pub const CONVERGED_RESIDUAL: f64 = 1e-6;

pub(crate) fn maximize(
    map: &dyn MeasurementMap,
    weights: &[Vec<f64>],
    start: Vec<CMatrix>,
    config: &SolverConfig,
) -> SolverOutcome {
    let mut x = project_to_states(&start);
    let mut px = evaluate(map, weights, &x).probabilities;
    let mut fx = log_likelihood_from_probabilities(weights, &px);
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut at_restart = true;
    let mut step = 1.0 / weights.len().max(1) as f64;
    let mut trace = vec![fx];
    let mut stall = 0usize;
    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    // round-off level of likelihood differences
    let slack = 4.0 * f64::EPSILON * weights.iter().flatten().sum::<f64>().max(1.0);

    while iterations < config.max_iterations {
        iterations += 1;
        let ey = evaluate(map, weights, &y);
        if !at_restart && (!ey.feasible || !ey.value.is_finite()) {
            y = x.clone();
            momentum = 1.0;
            at_restart = true;
            continue;
        }
        // backtracking on the quadratic lower model of L around y
        let mut candidate;
        let mut pc;
        loop {
            candidate = project_to_states(&axpy(&y, step, &ey.gradient));
            pc = map.probabilities(&candidate);
            let d = trace_free(&diff(&candidate, &y));
            let model_gain = inner(&ey.gradient, &d) - inner(&d, &d) / (2.0 * step);
            let gain = likelihood_gain(map, weights, &ey.probabilities, &d);
            if gain.is_finite() && gain >= model_gain - slack {
                break;
            }
            step *= config.backtracking_shrink;
            if step < 1e-30 {
                break;
            }
        }

        let gain = likelihood_gain(map, weights, &px, &diff(&candidate, &x));
        if !(gain >= 0.0) {
            // objective went down: drop momentum and retry from x, or
            // shorten the step if already there
            if at_restart {
                step *= config.backtracking_shrink;
                if step < 1e-30 {
                    break;
                }
                continue;
            }
            y = x.clone();
            momentum = 1.0;
            at_restart = true;
            continue;
        }

        let rel = gain / fx.abs().max(1.0);
        let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let beta = (momentum - 1.0) / next_momentum;
        y = axpy(&candidate, beta, &diff(&candidate, &x));
        x = candidate;
        px = pc;
        fx += gain;
        momentum = next_momentum;
        at_restart = false;
        trace.push(fx);
        step /= config.backtracking_shrink.powf(0.25);

        stall = if rel < config.relative_likelihood_tolerance {
            stall + 1
        } else {
            0
        };
        if stall >= STALL_WINDOW || iterations % 25 == 0 {
            residual = optimality_residual(map, weights, &x);
            let settled = (stall >= STALL_WINDOW && residual <= 0.1 * CONVERGED_RESIDUAL)
                || (stall >= 4 * STALL_WINDOW && residual <= CONVERGED_RESIDUAL);
            if residual < RESIDUAL_STOP || settled {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        residual = optimality_residual(map, weights, &x);
        converged = residual <= CONVERGED_RESIDUAL;
    }
    SolverOutcome {
        value: log_likelihood_from_probabilities(weights, &px),
        x,
        iterations,
        converged,
        residual,
        trace,
    }
}
