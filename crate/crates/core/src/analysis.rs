//! Quantities derived from reconstructed states: fidelities, the Dicke
//! spectrum, noise-model parameters, quantum Fisher information, the
//! six-qubit witness, and bootstrap error bars.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::measurements::{
    symmetric_overlap_bound, symmetric_overlap_bound_from_frequencies, Direction, SettingSet,
};
use crate::reconstruct::{ml_fit, SolverConfig};
use crate::spin_rep::{self, spin_matrix, SpinAxis, State};
use crate::synth::{multinomial, outcome_probabilities, substream, Dataset, NoiseParams};

/// Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))²`.
///
/// For two block-form states the multiplicities cancel and the value is
/// `(Σ_j Tr sqrt(sqrt(B_j) B'_j sqrt(B_j)))²`; mixed representations are
/// compared densely.
pub fn fidelity(a: &State, b: &State) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::invalid(format!(
            "fidelity between {} and {} qubit states",
            a.n_qubits(),
            b.n_qubits()
        )));
    }
    let root = match (a, b) {
        (State::Pi(x), State::Pi(y)) => x
            .blocks()
            .iter()
            .zip(y.blocks())
            .map(|(p, q)| linalg::root_fidelity(p, q))
            .sum::<f64>(),
        _ => linalg::root_fidelity(a.to_full()?.matrix(), b.to_full()?.matrix()),
    };
    Ok((root * root).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DickeSpectrum {
    /// `F_n = ⟨D_N^(n)| ρ |D_N^(n)⟩` for `n = 0..=N`.
    pub fidelities: Vec<f64>,
    pub symmetric_sum: f64,
}

impl DickeSpectrum {
    pub fn get(&self, n: usize) -> f64 {
        self.fidelities.get(n).copied().unwrap_or(0.0)
    }
}

pub fn dicke_spectrum(state: &State) -> Result<DickeSpectrum> {
    let fidelities: Vec<f64> = match state {
        State::Pi(s) => s
            .symmetric_block()
            .diagonal()
            .iter()
            .map(|z| z.re.clamp(0.0, 1.0))
            .collect(),
        State::Full(s) => (0..=s.n_qubits())
            .map(|n| {
                let v = spin_rep::dicke_vector(s.n_qubits(), n)?;
                Ok(linalg::quadratic_form(s.matrix(), &v).clamp(0.0, 1.0))
            })
            .collect::<Result<_>>()?,
    };
    let symmetric_sum = fidelities.iter().sum();
    Ok(DickeSpectrum {
        fidelities,
        symmetric_sum,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub params: NoiseParams,
    /// `F₂ + F₄ = 0`; λ set to 0.
    pub lambda_degenerate: bool,
    /// Raw values fell outside the model ranges and were clamped.
    pub out_of_model: bool,
}

/// Closed-form inversion of the noise model from the `D2`, `D3`, `D4`
/// fidelities: `q = 7/3 (F₂+F₄)/(F₂+F₃+F₄)`, `λ = (F₂-F₄)/(F₂+F₄)`.
pub fn estimate_noise_params(f2: f64, f3: f64, f4: f64) -> Result<NoiseEstimate> {
    let sum = f2 + f3 + f4;
    if !(sum > 0.0) {
        return Err(Error::invalid("Dicke fidelities F2+F3+F4 must be positive"));
    }
    let side = f2 + f4;
    let q_raw = 7.0 / 3.0 * side / sum;
    let (lambda_raw, lambda_degenerate) = if side > 0.0 {
        ((f2 - f4) / side, false)
    } else {
        (0.0, true)
    };
    let q = q_raw.clamp(0.0, 1.0);
    let lambda = lambda_raw.clamp(-1.0, 1.0);
    Ok(NoiseEstimate {
        params: NoiseParams { q, lambda },
        lambda_degenerate,
        out_of_model: q != q_raw || lambda != lambda_raw,
    })
}

/// Phase generator for the Fisher information.
#[derive(Clone, Debug)]
pub enum Generator {
    /// Collective spin `S_k = Σ_i σ_k^(i) / 2`.
    Spin(SpinAxis),
    /// PI generator given by one Hermitian block per spin.
    Blocks(Vec<CMatrix>),
    /// Dense Hermitian generator (dense states only).
    Dense(CMatrix),
}

fn block_qfi(rho: &CMatrix, h: &CMatrix) -> f64 {
    let (vals, vecs) = linalg::eigh(rho);
    let a: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let hk = vecs.adjoint() * h * &vecs;
    let mut acc = 0.0;
    for k in 0..a.len() {
        for l in 0..a.len() {
            let s = a[k] + a[l];
            if s > 1e-14 {
                acc += (a[k] - a[l]).powi(2) / s * hk[(k, l)].norm_sqr();
            }
        }
    }
    2.0 * acc
}

/// Quantum Fisher information
/// `F_Q = 2 Σ_{k,l} (a_k - a_l)² / (a_k + a_l) |⟨k|H|l⟩|²`.
///
/// For block-form states each spin block contributes independently; the
/// `d_j` copies of eigenvalue `μ/d_j` sum back to the block value.
pub fn qfi(state: &State, generator: &Generator) -> Result<f64> {
    match state {
        State::Pi(s) => {
            let blocks: Vec<CMatrix> = match generator {
                Generator::Spin(axis) => s.shape().spins().map(|j| spin_matrix(j, *axis)).collect(),
                Generator::Blocks(b) => b.clone(),
                Generator::Dense(_) => {
                    return qfi(&State::Full(spin_rep::embed_to_full(s)?), generator)
                }
            };
            if blocks.len() != s.blocks().len() {
                return Err(Error::invalid("generator block count does not match state"));
            }
            let mut total = 0.0;
            for (h, rho) in blocks.iter().zip(s.blocks()) {
                if h.nrows() != rho.nrows() || h.ncols() != rho.ncols() {
                    return Err(Error::invalid("generator block dimension mismatch"));
                }
                if linalg::hermiticity_residual(h) > 1e-9 {
                    return Err(Error::invalid("generator is not Hermitian"));
                }
                total += block_qfi(rho, h);
            }
            Ok(total)
        }
        State::Full(s) => {
            let h = match generator {
                Generator::Spin(axis) => spin_rep::collective_spin_dense(s.n_qubits(), *axis)?,
                Generator::Dense(h) => h.clone(),
                Generator::Blocks(b) => {
                    spin_rep::CoupledBasis::new(s.n_qubits())?.embed_operator(b)?
                }
            };
            if h.nrows() != s.dim() || h.ncols() != s.dim() {
                return Err(Error::invalid("generator dimension mismatch"));
            }
            if linalg::hermiticity_residual(&h) > 1e-9 {
                return Err(Error::invalid("generator is not Hermitian"));
            }
            Ok(block_qfi(s.matrix(), &h))
        }
    }
}

/// Coefficients of `W = c₀·1 - c₃ |D3⟩⟨D3| - c₂ |D2⟩⟨D2| - c₄ |D4⟩⟨D4|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessCoefficients {
    pub constant: f64,
    pub c3: f64,
    pub c2: f64,
    pub c4: f64,
}

pub const WITNESS: WitnessCoefficients = WitnessCoefficients {
    constant: 0.420,
    c3: 0.700,
    c2: 0.160,
    c4: 0.140,
};

/// Expectation of the six-qubit Dicke witness; negative values exclude
/// biseparability.
pub fn witness_expectation(state: &State) -> Result<f64> {
    if state.n_qubits() != 6 {
        return Err(Error::invalid(format!(
            "the witness is defined for 6 qubits, got {}",
            state.n_qubits()
        )));
    }
    let f = dicke_spectrum(state)?;
    Ok(WITNESS.constant - WITNESS.c3 * f.get(3) - WITNESS.c2 * f.get(2) - WITNESS.c4 * f.get(4))
}

/// Symmetric-subspace bound from the z, x and y settings of PI data.
pub fn dataset_symmetric_bound(dataset: &Dataset) -> Result<f64> {
    let find = |d: Direction, name: &str| {
        dataset
            .axis_setting(d)
            .ok_or_else(|| Error::invalid(format!("dataset has no {name} setting")))
    };
    let x = find(Direction::x_axis(), "x")?;
    let y = find(Direction::y_axis(), "y")?;
    let z = find(Direction::z_axis(), "z")?;
    symmetric_overlap_bound(&dataset.counts[x], &dataset.counts[y], &dataset.counts[z])
}

/// Symmetric-subspace bound evaluated on the exact x, y, z outcome
/// probabilities of a state.
pub fn state_symmetric_bound(state: &State) -> Result<f64> {
    let axes = SettingSet::pi(vec![Direction::x_axis(), Direction::y_axis(), Direction::z_axis()])?;
    let p = outcome_probabilities(state, &axes)?;
    symmetric_overlap_bound_from_frequencies(&p[0], &p[1], &p[2])
}

/// A named statistic of a reconstruction (or of the raw data).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Statistic {
    DickeFidelity(usize),
    SymmetricSum,
    NoiseQ,
    NoiseLambda,
    Qfi(SpinAxis),
    Witness,
    Trace,
    /// Computed from the x, y, z counts, not from the reconstruction.
    SymmetricBound,
}

impl Statistic {
    pub fn name(&self) -> String {
        match self {
            Statistic::DickeFidelity(n) => format!("F{n}"),
            Statistic::SymmetricSum => "symmetric_sum".into(),
            Statistic::NoiseQ => "q".into(),
            Statistic::NoiseLambda => "lambda".into(),
            Statistic::Qfi(SpinAxis::X) => "qfi_sx".into(),
            Statistic::Qfi(SpinAxis::Y) => "qfi_sy".into(),
            Statistic::Qfi(SpinAxis::Z) => "qfi_sz".into(),
            Statistic::Witness => "witness".into(),
            Statistic::Trace => "trace".into(),
            Statistic::SymmetricBound => "p_s_bound".into(),
        }
    }

    pub fn evaluate(&self, state: &State, dataset: &Dataset) -> Result<f64> {
        match self {
            Statistic::DickeFidelity(n) => Ok(dicke_spectrum(state)?.get(*n)),
            Statistic::SymmetricSum => Ok(dicke_spectrum(state)?.symmetric_sum),
            Statistic::NoiseQ | Statistic::NoiseLambda => {
                let f = dicke_spectrum(state)?;
                let est = estimate_noise_params(f.get(2), f.get(3), f.get(4))?;
                Ok(if *self == Statistic::NoiseQ {
                    est.params.q
                } else {
                    est.params.lambda
                })
            }
            Statistic::Qfi(axis) => qfi(state, &Generator::Spin(*axis)),
            Statistic::Witness => witness_expectation(state),
            Statistic::Trace => Ok(match state {
                State::Pi(s) => s.trace(),
                State::Full(s) => linalg::trace_re(s.matrix()),
            }),
            Statistic::SymmetricBound => dataset_symmetric_bound(dataset),
        }
    }
}

/// Data-to-statistics map rerun on every bootstrap replica.
pub trait Pipeline: Sync {
    fn statistic_names(&self) -> Vec<String>;
    fn evaluate(&self, dataset: &Dataset) -> Result<Vec<f64>>;
}

/// ML reconstruction followed by a list of statistics.
#[derive(Clone, Debug)]
pub struct ReconstructionPipeline {
    pub config: SolverConfig,
    pub statistics: Vec<Statistic>,
}

impl Pipeline for ReconstructionPipeline {
    fn statistic_names(&self) -> Vec<String> {
        self.statistics.iter().map(Statistic::name).collect()
    }

    fn evaluate(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        let needs_state = self
            .statistics
            .iter()
            .any(|s| *s != Statistic::SymmetricBound);
        let state = if needs_state {
            Some(ml_fit(dataset, &self.config)?.state)
        } else {
            None
        };
        self.statistics
            .iter()
            .map(|s| match (&state, s) {
                (_, Statistic::SymmetricBound) => dataset_symmetric_bound(dataset),
                (Some(st), _) => s.evaluate(st, dataset),
                (None, _) => unreachable!("state is fitted whenever a state statistic is requested"),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BootstrapResult {
    pub names: Vec<String>,
    /// Statistics of the original data.
    pub point_estimate: Vec<f64>,
    /// Sample standard deviation over successful replicas.
    pub std_dev: Vec<f64>,
    pub replicas: usize,
    pub failed: usize,
}

impl BootstrapResult {
    pub fn std_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.std_dev[i])
    }

    pub fn point_of(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.point_estimate[i])
    }
}

/// Default number of bootstrap replicas.
pub const DEFAULT_REPLICAS: usize = 100;

/// Multinomial resample of every setting at its observed total.
pub fn resample_dataset(dataset: &Dataset, seed: u64, replica: u64) -> Result<Dataset> {
    let mut rng = substream(seed, replica);
    let counts = dataset
        .counts
        .iter()
        .zip(dataset.frequencies())
        .map(|(c, f)| {
            let total: u64 = c.iter().sum();
            if total == 0 {
                Ok(vec![0; c.len()])
            } else {
                multinomial(&mut rng, total, &f)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        counts,
        ..dataset.clone()
    })
}

/// Nonparametric bootstrap: replicas are resampled from the empirical
/// frequencies with unchanged per-setting totals and run through
/// `pipeline` in parallel. Fails if more than 10% of the replicas fail.
pub fn bootstrap(
    dataset: &Dataset,
    pipeline: &dyn Pipeline,
    replicas: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if replicas < 2 {
        return Err(Error::invalid("bootstrap needs at least 2 replicas"));
    }
    let names = pipeline.statistic_names();
    let point_estimate = pipeline.evaluate(dataset)?;
    let outcomes: Vec<Result<Vec<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|r| pipeline.evaluate(&resample_dataset(dataset, seed, r as u64)?))
        .collect();
    let good: Vec<Vec<f64>> = outcomes.into_iter().filter_map(|r| r.ok()).collect();
    let failed = replicas - good.len();
    if failed * 10 > replicas {
        return Err(Error::Internal(format!(
            "{failed} of {replicas} bootstrap replicas failed"
        )));
    }
    if good.len() < 2 {
        return Err(Error::Internal("fewer than 2 successful replicas".into()));
    }
    let m = good.len() as f64;
    let std_dev = (0..names.len())
        .map(|i| {
            let mean = good.iter().map(|v| v[i]).sum::<f64>() / m;
            (good.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        })
        .collect();
    Ok(BootstrapResult {
        names,
        point_estimate,
        std_dev,
        replicas,
        failed,
    })
}
