//! Linear measurement maps shared by the likelihood solver.
//!
//! A point is a list of Hermitian blocks: one per spin for PI data, a
//! single `2^N` block for full data.

use rayon::prelude::*;

use crate::linalg::CMatrix;
use crate::measurements::pauli::{self, PauliTables};
use crate::measurements::PiMeasurementModel;

const ADJOINT_CHUNK: usize = 8;

pub(crate) trait MeasurementMap: Sync {
    /// `p[s][k] = Tr(x E_{s,k})`.
    fn probabilities(&self, x: &[CMatrix]) -> Vec<Vec<f64>>;

    /// `Σ_{s,k} w[s][k] E_{s,k}`.
    fn adjoint(&self, weights: &[Vec<f64>]) -> Vec<CMatrix>;
}

impl MeasurementMap for PiMeasurementModel {
    fn probabilities(&self, x: &[CMatrix]) -> Vec<Vec<f64>> {
        (0..PiMeasurementModel::n_settings(self))
            .into_par_iter()
            .map(|s| self.setting_probabilities(x, s))
            .collect()
    }

    fn adjoint(&self, weights: &[Vec<f64>]) -> Vec<CMatrix> {
        let zeros = || -> Vec<CMatrix> {
            self.shape()
                .dims()
                .into_iter()
                .map(|d| CMatrix::zeros(d, d))
                .collect()
        };
        // fixed chunks summed in order keep the result independent of
        // the thread count
        let partial: Vec<Vec<CMatrix>> = weights
            .par_chunks(ADJOINT_CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut acc = zeros();
                for (i, w) in chunk.iter().enumerate() {
                    self.accumulate_adjoint(w, c * ADJOINT_CHUNK + i, &mut acc);
                }
                acc
            })
            .collect();
        let mut out = zeros();
        for part in partial {
            out.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
        out
    }
}

pub(crate) struct PauliMap {
    pub n_qubits: usize,
    pub tables: PauliTables,
}

impl MeasurementMap for PauliMap {
    fn probabilities(&self, x: &[CMatrix]) -> Vec<Vec<f64>> {
        let coeffs = pauli::pauli_coefficients(&x[0], self.n_qubits);
        (0..self.tables.n_settings())
            .map(|s| self.tables.probabilities(&coeffs, s))
            .collect()
    }

    fn adjoint(&self, weights: &[Vec<f64>]) -> Vec<CMatrix> {
        let mut coeffs = vec![0.0; 1 << (2 * self.n_qubits)];
        for (s, w) in weights.iter().enumerate() {
            self.tables.accumulate_adjoint(w, s, &mut coeffs);
        }
        vec![pauli::matrix_from_coefficients(&coeffs, self.n_qubits)]
    }
}
