//! Maximum-likelihood reconstruction for PI and full data, its
//! compressed-sensing use on incomplete setting subsets, linear inversion,
//! and random-subset convergence studies.
//!
//! The objective is `Σ_{s,k} (n_{k,s} / N_max) log p_{k,s}` with
//! `N_max` the largest per-setting total.

pub(crate) mod model;
pub mod solver;
mod study;

pub use study::{subset_convergence_study, HistogramBin, SubsetStudy, SubsetTrial};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::measurements::{self, pauli::PauliTables, PiMeasurementModel, Scheme, SettingSet};
use crate::spin_rep::{self, block_shape, FullState, PIState, State};
use crate::synth::Dataset;

use model::{MeasurementMap, PauliMap};

/// Largest qubit number accepted by the full-scheme fit.
pub const MAX_FULL_FIT_QUBITS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub relative_likelihood_tolerance: f64,
    pub backtracking_shrink: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 5000,
            relative_likelihood_tolerance: 1e-10,
            backtracking_shrink: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.relative_likelihood_tolerance > 0.0) {
            return Err(Error::invalid("relative_likelihood_tolerance must be positive"));
        }
        if !(self.backtracking_shrink > 0.0 && self.backtracking_shrink < 1.0) {
            return Err(Error::invalid("backtracking_shrink must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub state: State,
    pub final_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖x - Π(x + ∇L(x))‖_F` at the returned state.
    pub optimality_residual: f64,
    /// Set when the settings do not determine a PI state uniquely.
    pub rank_deficient: bool,
    /// Likelihood after every accepted iteration; non-decreasing.
    pub likelihood_trace: Vec<f64>,
}

fn check_dataset(dataset: &Dataset, scheme: Scheme) -> Result<()> {
    dataset.validate()?;
    if dataset.scheme() != scheme {
        return Err(Error::invalid(format!(
            "expected {scheme} data, got {}",
            dataset.scheme()
        )));
    }
    Ok(())
}

fn pi_map(dataset: &Dataset) -> Result<PiMeasurementModel> {
    let shape = block_shape(dataset.n_qubits)?;
    let dirs = dataset
        .settings
        .directions()
        .ok_or_else(|| Error::invalid("PI settings required"))?;
    Ok(PiMeasurementModel::new(&shape, dirs))
}

fn pauli_map(dataset: &Dataset) -> Result<PauliMap> {
    let labels = dataset
        .settings
        .labels()
        .ok_or_else(|| Error::invalid("Pauli settings required"))?;
    Ok(PauliMap {
        n_qubits: dataset.n_qubits,
        tables: PauliTables::new(labels, dataset.n_qubits),
    })
}

/// Count-weighted log-likelihood of `state` for `dataset`.
pub fn log_likelihood(state: &State, dataset: &Dataset) -> Result<f64> {
    dataset.validate()?;
    if state.n_qubits() != dataset.n_qubits {
        return Err(Error::invalid("state and dataset qubit numbers differ"));
    }
    let probs = match (state, &dataset.settings) {
        (State::Pi(s), SettingSet::Pi(_)) => measurements::pi_probabilities(s, &dataset.settings)?,
        (State::Full(s), SettingSet::Full(_)) => {
            measurements::full_probabilities(s, &dataset.settings)?
        }
        _ => {
            return Err(Error::invalid(format!(
                "state representation does not match {} data",
                dataset.scheme()
            )))
        }
    };
    Ok(solver::log_likelihood_from_probabilities(
        &solver::count_weights(&dataset.counts),
        &probs,
    ))
}

/// Gradient of [`log_likelihood`] with respect to the state blocks
/// (one block for dense states), `Σ_{s,k} (n_{k,s}/N_max) / p_{k,s} E_{s,k}`.
pub fn log_likelihood_gradient(state: &State, dataset: &Dataset) -> Result<Vec<CMatrix>> {
    dataset.validate()?;
    if state.n_qubits() != dataset.n_qubits {
        return Err(Error::invalid("state and dataset qubit numbers differ"));
    }
    let weights = solver::count_weights(&dataset.counts);
    let (eval, n_blocks) = match (state, &dataset.settings) {
        (State::Pi(s), SettingSet::Pi(_)) => (
            solver::evaluate(&pi_map(dataset)?, &weights, s.blocks()),
            s.blocks().len(),
        ),
        (State::Full(s), SettingSet::Full(_)) => {
            if dataset.n_qubits > MAX_FULL_FIT_QUBITS {
                return Err(Error::UnsupportedSize(format!(
                    "full-scheme likelihoods are limited to {MAX_FULL_FIT_QUBITS} qubits"
                )));
            }
            (
                solver::evaluate(&pauli_map(dataset)?, &weights, std::slice::from_ref(s.matrix())),
                1,
            )
        }
        _ => {
            return Err(Error::invalid(format!(
                "state representation does not match {} data",
                dataset.scheme()
            )))
        }
    };
    debug_assert_eq!(eval.gradient.len(), n_blocks);
    Ok(solver::unshift_gradient(eval.gradient, &weights))
}

fn pi_rank_deficient(dataset: &Dataset) -> Result<bool> {
    if dataset.n_qubits > measurements::RANK_CHECK_MAX_QUBITS {
        return Ok(dataset.n_settings() < spin_rep::setting_count(dataset.n_qubits)?);
    }
    let shape = block_shape(dataset.n_qubits)?;
    let (rank, params) = measurements::design_rank(&shape, &dataset.settings)?;
    Ok(rank < params)
}

fn run(
    map: &dyn MeasurementMap,
    dataset: &Dataset,
    start: Vec<CMatrix>,
    config: &SolverConfig,
) -> solver::SolverOutcome {
    let weights = solver::count_weights(&dataset.counts);
    solver::maximize(map, &weights, start, config)
}

/// ML fit of block-form state to PI data, from the maximally mixed state.
pub fn ml_fit_pi(dataset: &Dataset, config: &SolverConfig) -> Result<ReconstructionResult> {
    ml_fit_pi_from(dataset, config, None)
}

/// As [`ml_fit_pi`] from a chosen feasible start.
pub fn ml_fit_pi_from(
    dataset: &Dataset,
    config: &SolverConfig,
    start: Option<&PIState>,
) -> Result<ReconstructionResult> {
    config.validate()?;
    check_dataset(dataset, Scheme::Pi)?;
    let rank_deficient = pi_rank_deficient(dataset)?;
    if rank_deficient {
        log::warn!("PI settings are tomographically incomplete; fitting in compressed-sensing mode");
    }
    let map = pi_map(dataset)?;
    let start = match start {
        Some(s) if s.n_qubits() == dataset.n_qubits => s.blocks().to_vec(),
        Some(_) => return Err(Error::invalid("start state has the wrong size")),
        None => PIState::maximally_mixed(dataset.n_qubits)?.into_blocks(),
    };
    let out = run(&map, dataset, start, config);
    Ok(ReconstructionResult {
        state: State::Pi(PIState::from_blocks_unchecked(dataset.n_qubits, out.x)?),
        final_log_likelihood: out.value,
        iterations: out.iterations,
        converged: out.converged,
        optimality_residual: out.residual,
        rank_deficient,
        likelihood_trace: out.trace,
    })
}

/// ML fit of a dense state to Pauli data.
pub fn ml_fit_full(dataset: &Dataset, config: &SolverConfig) -> Result<ReconstructionResult> {
    ml_fit_full_from(dataset, config, None)
}

pub fn ml_fit_full_from(
    dataset: &Dataset,
    config: &SolverConfig,
    start: Option<&FullState>,
) -> Result<ReconstructionResult> {
    config.validate()?;
    check_dataset(dataset, Scheme::Full)?;
    if dataset.n_qubits > MAX_FULL_FIT_QUBITS {
        return Err(Error::UnsupportedSize(format!(
            "full-scheme fits are limited to {MAX_FULL_FIT_QUBITS} qubits, got {}",
            dataset.n_qubits
        )));
    }
    let map = pauli_map(dataset)?;
    let start = match start {
        Some(s) if s.n_qubits() == dataset.n_qubits => s.matrix().clone(),
        Some(_) => return Err(Error::invalid("start state has the wrong size")),
        None => FullState::maximally_mixed(dataset.n_qubits)?.into_matrix(),
    };
    let out = run(&map, dataset, vec![start], config);
    let x = out.x.into_iter().next().expect("one block");
    Ok(ReconstructionResult {
        state: State::Full(FullState::from_matrix_unchecked(dataset.n_qubits, x)?),
        final_log_likelihood: out.value,
        iterations: out.iterations,
        converged: out.converged,
        optimality_residual: out.residual,
        rank_deficient: dataset.n_settings() < 3usize.pow(dataset.n_qubits as u32),
        likelihood_trace: out.trace,
    })
}

/// ML fit for either scheme.
pub fn ml_fit(dataset: &Dataset, config: &SolverConfig) -> Result<ReconstructionResult> {
    match dataset.scheme() {
        Scheme::Pi => ml_fit_pi(dataset, config),
        Scheme::Full => ml_fit_full(dataset, config),
    }
}

/// The same likelihood restricted to a subset of the settings.
pub fn cs_fit(
    dataset: &Dataset,
    subset_indices: &[usize],
    config: &SolverConfig,
) -> Result<ReconstructionResult> {
    ml_fit(&dataset.subset(subset_indices)?, config)
}

/// Unconstrained least-squares estimate of a PI state.
#[derive(Clone, Debug)]
pub struct LinearInversion {
    pub blocks: Vec<CMatrix>,
    pub min_eigenvalue: f64,
}

impl LinearInversion {
    pub fn total_trace(&self) -> f64 {
        self.blocks.iter().map(crate::linalg::trace_re).sum()
    }
}

/// Least-squares solution of `frequencies = design · parameters` without
/// positivity, reporting the smallest block eigenvalue.
pub fn linear_inversion_pi(dataset: &Dataset) -> Result<LinearInversion> {
    check_dataset(dataset, Scheme::Pi)?;
    let map = pi_map(dataset)?;
    let a = map.design_matrix();
    let rank = crate::linalg::numerical_rank(&a, 1e-10);
    if rank < a.ncols() {
        return Err(Error::RankDeficient {
            rank,
            params: a.ncols(),
        });
    }
    let f: Vec<f64> = dataset.frequencies().into_iter().flatten().collect();
    let rhs = DMatrix::from_column_slice(f.len(), 1, &f);
    let params = a
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Internal(e.to_string()))?;
    let blocks = map.blocks_from_parameters(params.as_slice());
    let min_eigenvalue = blocks
        .iter()
        .map(crate::linalg::min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    Ok(LinearInversion {
        blocks,
        min_eigenvalue,
    })
}
