use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use super::{cs_fit, ml_fit, ReconstructionResult, SolverConfig};
use crate::analysis::fidelity;
use crate::error::{Error, Result};
use crate::synth::{substream, Dataset};

/// Fidelity histogram bin width.
pub const BIN_WIDTH: f64 = 0.01;

#[derive(Clone, Debug, Serialize)]
pub struct SubsetTrial {
    pub size: usize,
    pub trial: usize,
    pub indices: Vec<usize>,
    pub fidelity: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HistogramBin {
    pub size: usize,
    /// Lower edge of the bin.
    pub fidelity: f64,
    pub count: usize,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct SubsetStudy {
    pub reference: ReconstructionResult,
    pub trials: Vec<SubsetTrial>,
    pub histogram: Vec<HistogramBin>,
}

impl SubsetStudy {
    pub fn mean_fidelity(&self, size: usize) -> Option<f64> {
        let f: Vec<f64> = self
            .trials
            .iter()
            .filter(|t| t.size == size)
            .map(|t| t.fidelity)
            .collect();
        (!f.is_empty()).then(|| f.iter().sum::<f64>() / f.len() as f64)
    }
}

/// Random subsets of settings of every requested size, each fitted and
/// compared with the reconstruction from all settings. Subset `t` of size
/// `k` is drawn from its own random stream, so results do not depend on
/// scheduling.
pub fn subset_convergence_study(
    dataset: &Dataset,
    subset_sizes: &[usize],
    trials_per_size: usize,
    seed: u64,
    config: &SolverConfig,
) -> Result<SubsetStudy> {
    let total = dataset.n_settings();
    if let Some(&bad) = subset_sizes.iter().find(|&&k| k == 0 || k > total) {
        return Err(Error::invalid(format!(
            "subset size {bad} outside 1..={total}"
        )));
    }
    let reference = ml_fit(dataset, config)?;
    let jobs: Vec<(usize, usize)> = subset_sizes
        .iter()
        .flat_map(|&k| (0..trials_per_size).map(move |t| (k, t)))
        .collect();
    let trials = jobs
        .par_iter()
        .map(|&(size, trial)| {
            let mut rng = substream(seed, ((size as u64) << 32) | trial as u64);
            let mut indices = index::sample(&mut rng, total, size).into_vec();
            indices.sort_unstable();
            let fit = cs_fit(dataset, &indices, config)?;
            Ok(SubsetTrial {
                size,
                trial,
                fidelity: fidelity(&fit.state, &reference.state)?,
                converged: fit.converged,
                indices,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let histogram = histogram(&trials, subset_sizes);
    Ok(SubsetStudy {
        reference,
        trials,
        histogram,
    })
}

fn histogram(trials: &[SubsetTrial], sizes: &[usize]) -> Vec<HistogramBin> {
    let n_bins = (1.0 / BIN_WIDTH).round() as usize;
    let mut out = Vec::new();
    for &size in sizes {
        let of_size: Vec<&SubsetTrial> = trials.iter().filter(|t| t.size == size).collect();
        let mut counts = vec![0usize; n_bins];
        for t in &of_size {
            let bin = ((t.fidelity / BIN_WIDTH).floor() as usize).min(n_bins - 1);
            counts[bin] += 1;
        }
        for (b, &count) in counts.iter().enumerate() {
            out.push(HistogramBin {
                size,
                fidelity: b as f64 * BIN_WIDTH,
                count,
                probability: if of_size.is_empty() {
                    0.0
                } else {
                    count as f64 / of_size.len() as f64
                },
            });
        }
    }
    out
}
