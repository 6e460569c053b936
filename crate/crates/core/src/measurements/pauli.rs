//! Pauli-basis transforms for full tomography.
//!
//! A dense state is mapped to its `4^N` Pauli expectation values
//! `c_P = Tr(ρ P)` with one pass per qubit. Outcome probabilities of a local
//! Pauli setting are then a Walsh–Hadamard transform of the `2^N`
//! coefficients compatible with that setting, and the likelihood gradient is
//! the adjoint of the same two steps.
//!
//! Coefficient index: base-4 digits, qubit 0 most significant, with digits
//! `I = 0, X = 1, Y = 2, Z = 3`.

use num_complex::Complex64;

use super::{Pauli, PauliString};
use crate::linalg::CMatrix;

/// Position of the coefficient for label digits `(r_k, c_k)` packed the way
/// the in-place transform leaves them.
fn slot_to_pauli_index(n_qubits: usize) -> Vec<usize> {
    let dim = 1usize << n_qubits;
    let mut table = vec![0usize; dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            let mut idx = 0usize;
            for k in 0..n_qubits {
                let bit = n_qubits - 1 - k;
                let digit = 2 * ((r >> bit) & 1) + ((c >> bit) & 1);
                idx = idx * 4 + digit;
            }
            table[r * dim + c] = idx;
        }
    }
    table
}

/// Pauli expectation values `Tr(ρ P)` of a dense Hermitian matrix.
pub fn pauli_coefficients(rho: &CMatrix, n_qubits: usize) -> Vec<f64> {
    let dim = 1usize << n_qubits;
    let mut w: Vec<Complex64> = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        for c in 0..dim {
            w.push(rho[(r, c)]);
        }
    }
    let i = Complex64::new(0.0, 1.0);
    for bit in 0..n_qubits {
        let mask = 1usize << bit;
        for r in (0..dim).filter(|r| r & mask == 0) {
            for c in (0..dim).filter(|c| c & mask == 0) {
                let s00 = r * dim + c;
                let s01 = r * dim + (c | mask);
                let s10 = (r | mask) * dim + c;
                let s11 = (r | mask) * dim + (c | mask);
                let (a00, a01, a10, a11) = (w[s00], w[s01], w[s10], w[s11]);
                w[s00] = a00 + a11;
                w[s01] = a01 + a10;
                w[s10] = i * (a01 - a10);
                w[s11] = a00 - a11;
            }
        }
    }
    let table = slot_to_pauli_index(n_qubits);
    let mut out = vec![0.0; dim * dim];
    for (slot, z) in w.iter().enumerate() {
        out[table[slot]] = z.re;
    }
    out
}

/// Inverse of [`pauli_coefficients`]: `(1/2^N) Σ_P c_P P`.
pub fn matrix_from_coefficients(coeffs: &[f64], n_qubits: usize) -> CMatrix {
    let dim = 1usize << n_qubits;
    let table = slot_to_pauli_index(n_qubits);
    let mut w: Vec<Complex64> = table
        .iter()
        .map(|&p| Complex64::new(coeffs[p], 0.0))
        .collect();
    let i = Complex64::new(0.0, 1.0);
    for bit in 0..n_qubits {
        let mask = 1usize << bit;
        for r in (0..dim).filter(|r| r & mask == 0) {
            for c in (0..dim).filter(|c| c & mask == 0) {
                let s00 = r * dim + c;
                let s01 = r * dim + (c | mask);
                let s10 = (r | mask) * dim + c;
                let s11 = (r | mask) * dim + (c | mask);
                let (ci, cx, cy, cz) = (w[s00], w[s01], w[s10], w[s11]);
                w[s00] = (ci + cz) * 0.5;
                w[s11] = (ci - cz) * 0.5;
                w[s01] = (cx - i * cy) * 0.5;
                w[s10] = (cx + i * cy) * 0.5;
            }
        }
    }
    CMatrix::from_fn(dim, dim, |r, c| w[r * dim + c])
}

/// In-place unnormalized Walsh–Hadamard transform.
pub fn walsh_hadamard(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for k in start..start + h {
                let (a, b) = (v[k], v[k + h]);
                v[k] = a + b;
                v[k + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// For every setting, the Pauli coefficient index of each subset `T` of
/// qubits (bitmask with qubit 0 most significant).
#[derive(Clone, Debug)]
pub struct PauliTables {
    n_qubits: usize,
    indices: Vec<Vec<u32>>,
}

impl PauliTables {
    pub fn new(labels: &[PauliString], n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let indices = labels
            .iter()
            .map(|label| {
                (0..dim)
                    .map(|t| {
                        let mut idx = 0u32;
                        for (k, p) in label.0.iter().enumerate() {
                            let digit = if (t >> (n_qubits - 1 - k)) & 1 == 1 {
                                match p {
                                    Pauli::X => 1,
                                    Pauli::Y => 2,
                                    Pauli::Z => 3,
                                }
                            } else {
                                0
                            };
                            idx = idx * 4 + digit;
                        }
                        idx
                    })
                    .collect()
            })
            .collect();
        PauliTables { n_qubits, indices }
    }

    pub fn n_settings(&self) -> usize {
        self.indices.len()
    }

    /// Outcome probabilities of setting `s` from the Pauli coefficients.
    pub fn probabilities(&self, coeffs: &[f64], s: usize) -> Vec<f64> {
        let dim = 1usize << self.n_qubits;
        let mut v: Vec<f64> = self.indices[s].iter().map(|&p| coeffs[p as usize]).collect();
        walsh_hadamard(&mut v);
        let scale = 1.0 / dim as f64;
        v.iter_mut().for_each(|x| *x *= scale);
        v
    }

    /// Adds `Tr(E_{s,x} P)`-weighted outcome weights of setting `s` into the
    /// coefficient vector of `Σ_x w_x E_{s,x}`.
    pub fn accumulate_adjoint(&self, weights: &[f64], s: usize, out: &mut [f64]) {
        let mut v = weights.to_vec();
        walsh_hadamard(&mut v);
        for (t, &p) in self.indices[s].iter().enumerate() {
            out[p as usize] += v[t];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    fn pauli_matrix(p: usize) -> CMatrix {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match p {
            0 => CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            1 => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            2 => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            _ => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }

    #[test]
    fn coefficients_match_dense_traces() {
        let n = 2;
        let a = CMatrix::from_fn(4, 4, |r, c| {
            Complex64::new((r * 3 + c) as f64 * 0.1, (r as f64 - c as f64) * 0.07)
        });
        let rho = linalg::hermitian_part(&a);
        let coeffs = pauli_coefficients(&rho, n);
        for p0 in 0..4 {
            for p1 in 0..4 {
                let p = pauli_matrix(p0).kronecker(&pauli_matrix(p1));
                let expected = (&rho * p).trace().re;
                assert!((coeffs[p0 * 4 + p1] - expected).abs() < 1e-12);
            }
        }
        let back = matrix_from_coefficients(&coeffs, n);
        assert!(linalg::frobenius(&(back - rho)) < 1e-12);
    }

    #[test]
    fn hadamard_is_involution_up_to_scale() {
        let mut v = vec![1.0, 2.0, -3.0, 0.5];
        walsh_hadamard(&mut v);
        walsh_hadamard(&mut v);
        assert_eq!(v, vec![4.0, 8.0, -12.0, 2.0]);
    }
}
