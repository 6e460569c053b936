//! Angular-momentum block machinery for permutationally invariant states.
//!
//! An N-qubit PI operator is block diagonal in the coupled basis
//! `|j, m, α⟩`: every spin-`j` sector appears `d_j` times with identical
//! content, so a PI density operator is fully described by one Hermitian
//! block `B_j = p_j ρ_j` per spin. The dense 2^N representation is only ever
//! built for small N, as a cross-check and for full tomography.
//!
//! Within a block, rows and columns are ordered by descending `m`
//! (`m = j, j-1, …, -j`). Qubit state `|0⟩` carries `m = +1/2`, so the
//! symmetric-block index of a Dicke state with `n` excitations is `n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, binomial, binomial_u128, CMatrix, CVector, C_ZERO};

/// Largest qubit number handled by the block formulas.
pub const MAX_QUBITS: usize = 64;
/// Largest qubit number for which the dense 2^N representation is built.
pub const MAX_DENSE_QUBITS: usize = 8;
/// Tolerance for the Hermitian/PSD/trace invariants of states.
pub const STATE_TOLERANCE: f64 = 1e-9;

/// Spin quantum number stored as `2j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin(u32);

impl Spin {
    pub fn from_twice(two_j: u32) -> Self {
        Spin(two_j)
    }

    /// Parses a (half-)integer spin value such as `1.5`.
    pub fn from_value(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !(twice >= 0.0) || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!("{j} is not a valid spin")));
        }
        Ok(Spin(twice.round() as u32))
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// `m` value at block index `i` (descending ordering).
    pub fn m_at(self, i: usize) -> f64 {
        self.value() - i as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockInfo {
    pub spin: Spin,
    pub dim: usize,
    pub multiplicity: u128,
}

/// Spin sectors of N qubits, ordered by descending `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockShape {
    pub n_qubits: usize,
    pub blocks: Vec<BlockInfo>,
}

impl BlockShape {
    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim).collect()
    }

    pub fn multiplicities(&self) -> Vec<u128> {
        self.blocks.iter().map(|b| b.multiplicity).collect()
    }

    pub fn spins(&self) -> impl Iterator<Item = Spin> + '_ {
        self.blocks.iter().map(|b| b.spin)
    }

    /// Number of real parameters in one Hermitian matrix per block.
    pub fn hermitian_parameter_count(&self) -> usize {
        self.blocks.iter().map(|b| b.dim * b.dim).sum()
    }

    pub fn index_of(&self, spin: Spin) -> Option<usize> {
        self.blocks.iter().position(|b| b.spin == spin)
    }
}

/// Block decomposition of N qubits with `d_j = C(N, N/2-j) - C(N, N/2-j-1)`.
pub fn block_shape(n_qubits: usize) -> Result<BlockShape> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::invalid(format!(
            "number of qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"
        )));
    }
    let n = n_qubits as u64;
    let mut blocks = Vec::new();
    // k = N/2 - j counts excitations of the highest-weight vector
    for k in 0..=(n / 2) {
        let two_j = (n - 2 * k) as u32;
        let upper = binomial_u128(n, k).expect("binomial fits in u128 for N <= 64");
        let lower = if k == 0 {
            0
        } else {
            binomial_u128(n, k - 1).expect("binomial fits in u128 for N <= 64")
        };
        blocks.push(BlockInfo {
            spin: Spin(two_j),
            dim: two_j as usize + 1,
            multiplicity: upper - lower,
        });
    }
    Ok(BlockShape { n_qubits, blocks })
}

/// Free real parameters of an N-qubit PI state, `C(N+3, N) - 1`.
pub fn pi_parameter_count(n_qubits: usize) -> Result<usize> {
    if n_qubits == 0 {
        return Err(Error::invalid("number of qubits must be positive"));
    }
    Ok(binomial(n_qubits as u64 + 3, 3) as usize - 1)
}

/// Number of PI measurement settings, `C(N+2, N)`.
pub fn setting_count(n_qubits: usize) -> Result<usize> {
    if n_qubits == 0 {
        return Err(Error::invalid("number of qubits must be positive"));
    }
    Ok((n_qubits * n_qubits + 3 * n_qubits + 2) / 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

/// Spin-`j` angular momentum component in the descending-`m` basis.
pub fn spin_matrix(spin: Spin, axis: SpinAxis) -> CMatrix {
    let d = spin.dim();
    let j = spin.value();
    let mut out = CMatrix::zeros(d, d);
    match axis {
        SpinAxis::Z => {
            for i in 0..d {
                out[(i, i)] = Complex64::new(spin.m_at(i), 0.0);
            }
        }
        SpinAxis::X | SpinAxis::Y => {
            // J+ has entries (i-1, i) = sqrt(j(j+1) - m(m+1)) with m = m_at(i)
            for i in 1..d {
                let m = spin.m_at(i);
                let c = (j * (j + 1.0) - m * (m + 1.0)).sqrt() / 2.0;
                if axis == SpinAxis::X {
                    out[(i - 1, i)] = Complex64::new(c, 0.0);
                    out[(i, i - 1)] = Complex64::new(c, 0.0);
                } else {
                    out[(i - 1, i)] = Complex64::new(0.0, -c);
                    out[(i, i - 1)] = Complex64::new(0.0, c);
                }
            }
        }
    }
    out
}

/// Spin-`j` representation matrix of a rotation, `D^j = exp(-iφJz) exp(-iθJy)`.
#[derive(Clone, Debug)]
pub struct WignerRotation {
    pub spin: Spin,
    pub matrix: CMatrix,
}

impl WignerRotation {
    /// Column `i` of the matrix: the rotated image of the basis vector with
    /// `m = j - i`.
    pub fn column(&self, i: usize) -> CVector {
        self.matrix.column(i).into_owned()
    }
}

pub fn wigner_rotation(spin: Spin, theta: f64, phi: f64) -> WignerRotation {
    let d = spin.dim();
    let (vals, vecs) = linalg::eigh(&spin_matrix(spin, SpinAxis::Y));
    let mut scaled = vecs.clone();
    for (k, &v) in vals.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -theta * v);
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    let mut small_d = &scaled * vecs.adjoint();
    for i in 0..d {
        let phase = Complex64::from_polar(1.0, -phi * spin.m_at(i));
        small_d.row_mut(i).iter_mut().for_each(|z| *z *= phase);
    }
    WignerRotation {
        spin,
        matrix: small_d,
    }
}

/// Permutationally invariant state stored as one block `B_j = p_j ρ_j` per spin.
#[derive(Clone, Debug, PartialEq)]
pub struct PIState {
    shape: BlockShape,
    blocks: Vec<CMatrix>,
}

impl PIState {
    /// Validates Hermiticity, positivity and unit total trace.
    pub fn new(n_qubits: usize, blocks: Vec<CMatrix>) -> Result<Self> {
        let state = Self::from_blocks_unchecked(n_qubits, blocks)?;
        state.validate(STATE_TOLERANCE)?;
        Ok(state)
    }

    /// Checks only the block dimensions. Used for unconstrained estimates
    /// such as linear inversion.
    pub fn from_blocks_unchecked(n_qubits: usize, blocks: Vec<CMatrix>) -> Result<Self> {
        let shape = block_shape(n_qubits)?;
        if blocks.len() != shape.blocks.len() {
            return Err(Error::invalid(format!(
                "expected {} blocks for {} qubits, got {}",
                shape.blocks.len(),
                n_qubits,
                blocks.len()
            )));
        }
        for (info, b) in shape.blocks.iter().zip(&blocks) {
            if b.nrows() != info.dim || b.ncols() != info.dim {
                return Err(Error::invalid(format!(
                    "block j={} must be {}x{}, got {}x{}",
                    info.spin.value(),
                    info.dim,
                    info.dim,
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(PIState { shape, blocks })
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let mut total = 0.0;
        for (info, b) in self.shape.blocks.iter().zip(&self.blocks) {
            let j = info.spin.value();
            if linalg::hermiticity_residual(b) > tol {
                return Err(Error::Validation(format!("block j={j} is not Hermitian")));
            }
            let min = linalg::min_eigenvalue(b);
            if min < -tol {
                return Err(Error::Validation(format!(
                    "block j={j} has negative eigenvalue {min:e}"
                )));
            }
            total += linalg::trace_re(b);
        }
        if (total - 1.0).abs() > tol {
            return Err(Error::Validation(format!(
                "total trace is {total}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let shape = block_shape(n_qubits)?;
        let total = 2f64.powi(n_qubits as i32);
        let blocks = shape
            .blocks
            .iter()
            .map(|b| {
                let w = b.multiplicity as f64 / total;
                CMatrix::identity(b.dim, b.dim) * Complex64::new(w, 0.0)
            })
            .collect();
        Ok(PIState { shape, blocks })
    }

    /// State supported on the symmetric block only.
    pub fn symmetric(n_qubits: usize, block: CMatrix) -> Result<Self> {
        let shape = block_shape(n_qubits)?;
        let mut blocks: Vec<CMatrix> = shape
            .blocks
            .iter()
            .map(|b| CMatrix::zeros(b.dim, b.dim))
            .collect();
        blocks[0] = block;
        PIState::new(n_qubits, blocks)
    }

    pub fn n_qubits(&self) -> usize {
        self.shape.n_qubits
    }

    pub fn shape(&self) -> &BlockShape {
        &self.shape
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<CMatrix> {
        self.blocks
    }

    pub fn block(&self, spin: Spin) -> Option<&CMatrix> {
        self.shape.index_of(spin).map(|i| &self.blocks[i])
    }

    /// The spin-N/2 block.
    pub fn symmetric_block(&self) -> &CMatrix {
        &self.blocks[0]
    }

    /// Weights `p_j = Tr B_j`.
    pub fn weights(&self) -> Vec<f64> {
        self.blocks.iter().map(linalg::trace_re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// Blockwise Frobenius distance.
    pub fn distance(&self, other: &PIState) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| linalg::frobenius(&(a - b)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.nrows() > 0)
            .map(linalg::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Convex combination `(1-t)·self + t·other`.
    pub fn mix(&self, other: &PIState, t: f64) -> Result<PIState> {
        if self.n_qubits() != other.n_qubits() {
            return Err(Error::invalid("cannot mix states of different size"));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a * Complex64::new(1.0 - t, 0.0) + b * Complex64::new(t, 0.0))
            .collect();
        Ok(PIState {
            shape: self.shape.clone(),
            blocks,
        })
    }
}

/// Dense `2^N × 2^N` density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FullState {
    n_qubits: usize,
    matrix: CMatrix,
}

impl FullState {
    pub fn new(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        let state = Self::from_matrix_unchecked(n_qubits, matrix)?;
        state.validate(STATE_TOLERANCE)?;
        Ok(state)
    }

    pub fn from_matrix_unchecked(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::UnsupportedSize(format!(
                "dense states are limited to 1..={MAX_DENSE_QUBITS} qubits, got {n_qubits}"
            )));
        }
        let dim = 1usize << n_qubits;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::invalid(format!(
                "density matrix for {n_qubits} qubits must be {dim}x{dim}"
            )));
        }
        Ok(FullState { n_qubits, matrix })
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if linalg::hermiticity_residual(&self.matrix) > tol {
            return Err(Error::Validation("density matrix is not Hermitian".into()));
        }
        let min = linalg::min_eigenvalue(&self.matrix);
        if min < -tol {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        let tr = linalg::trace_re(&self.matrix);
        if (tr - 1.0).abs() > tol {
            return Err(Error::Validation(format!("trace is {tr}, expected 1")));
        }
        Ok(())
    }

    pub fn from_pure(n_qubits: usize, amplitudes: &CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::invalid("zero state vector"));
        }
        let v = amplitudes / Complex64::new(norm, 0.0);
        FullState::new(n_qubits, &v * v.adjoint())
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits.min(MAX_DENSE_QUBITS + 1);
        FullState::from_matrix_unchecked(
            n_qubits,
            CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        )
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        linalg::inner_re(&self.matrix, &self.matrix)
    }
}

/// Dicke state with `n` excitations, as a rank-one symmetric-block projector.
pub fn dicke_state_pi(n_qubits: usize, n_excitations: usize) -> Result<PIState> {
    if n_excitations > n_qubits {
        return Err(Error::invalid(format!(
            "excitation number {n_excitations} exceeds qubit number {n_qubits}"
        )));
    }
    let d = n_qubits + 1;
    let mut block = CMatrix::zeros(d, d);
    block[(n_excitations, n_excitations)] = linalg::C_ONE;
    PIState::symmetric(n_qubits, block)
}

/// Orthonormal coupled basis `|j, m, α⟩` of the N-qubit space.
///
/// Highest-weight vectors of each spin are obtained by Gram-Schmidt on the
/// weight space, completing the lowered images of higher spins with
/// computational basis states taken in ascending order; the rest of each
/// multiplet follows from the collective lowering operator.
pub struct CoupledBasis {
    shape: BlockShape,
    /// `vectors[block][α]` is a `2^N × (2j+1)` matrix whose columns are the
    /// multiplet `m = j … -j`.
    vectors: Vec<Vec<DMatrix<f64>>>,
}

impl CoupledBasis {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_DENSE_QUBITS {
            return Err(Error::UnsupportedSize(format!(
                "dense embedding is limited to {MAX_DENSE_QUBITS} qubits, got {n_qubits}"
            )));
        }
        let shape = block_shape(n_qubits)?;
        let dim = 1usize << n_qubits;
        // all basis vectors generated so far, grouped by m index k = N/2 - m
        let mut by_weight: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_qubits + 1];
        let mut vectors = Vec::with_capacity(shape.blocks.len());

        for info in &shape.blocks {
            let j = info.spin.value();
            let k = (n_qubits - info.spin.twice() as usize) / 2;
            let mut fresh: Vec<Vec<f64>> = Vec::new();
            for x in 0..dim {
                if (x as u32).count_ones() as usize != k {
                    continue;
                }
                let mut v = vec![0.0; dim];
                v[x] = 1.0;
                for _ in 0..2 {
                    for u in by_weight[k].iter().chain(fresh.iter()) {
                        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                        v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
                    }
                }
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > 1e-8 {
                    v.iter_mut().for_each(|a| *a /= norm);
                    fresh.push(v);
                }
            }
            if fresh.len() as u128 != info.multiplicity {
                return Err(Error::Internal(format!(
                    "found {} highest-weight vectors for j={j}, expected {}",
                    fresh.len(),
                    info.multiplicity
                )));
            }
            let mut multiplets = Vec::with_capacity(fresh.len());
            for top in fresh {
                let mut cols = DMatrix::<f64>::zeros(dim, info.dim);
                let mut current = top;
                for i in 0..info.dim {
                    cols.column_mut(i).copy_from_slice(&current);
                    by_weight[k + i].push(current.clone());
                    if i + 1 < info.dim {
                        let m = info.spin.m_at(i);
                        let norm = (j * (j + 1.0) - m * (m - 1.0)).sqrt();
                        current = lower(&current, n_qubits);
                        current.iter_mut().for_each(|a| *a /= norm);
                    }
                }
                multiplets.push(cols);
            }
            vectors.push(multiplets);
        }
        Ok(CoupledBasis { shape, vectors })
    }

    pub fn shape(&self) -> &BlockShape {
        &self.shape
    }

    pub fn multiplet(&self, block: usize, alpha: usize) -> &DMatrix<f64> {
        &self.vectors[block][alpha]
    }

    pub fn embed(&self, state: &PIState) -> Result<FullState> {
        let n = self.shape.n_qubits;
        if state.n_qubits() != n {
            return Err(Error::invalid("state size does not match basis"));
        }
        let dim = 1usize << n;
        let mut out = CMatrix::zeros(dim, dim);
        for (bi, info) in self.shape.blocks.iter().enumerate() {
            let b = &state.blocks()[bi] / Complex64::new(info.multiplicity as f64, 0.0);
            for v in &self.vectors[bi] {
                let vc = v.map(|a| Complex64::new(a, 0.0));
                out += &vc * &b * vc.transpose();
            }
        }
        FullState::from_matrix_unchecked(n, out)
    }

    /// Dense operator `⊕_j 1_{d_j} ⊗ H_j` for PI operator blocks `H_j`.
    pub fn embed_operator(&self, blocks: &[CMatrix]) -> Result<CMatrix> {
        if blocks.len() != self.shape.blocks.len()
            || blocks
                .iter()
                .zip(&self.shape.blocks)
                .any(|(b, info)| b.nrows() != info.dim || b.ncols() != info.dim)
        {
            return Err(Error::invalid("operator blocks do not match basis"));
        }
        let dim = 1usize << self.shape.n_qubits;
        let mut out = CMatrix::zeros(dim, dim);
        for (bi, h) in blocks.iter().enumerate() {
            for v in &self.vectors[bi] {
                let vc = v.map(|a| Complex64::new(a, 0.0));
                out += &vc * h * vc.transpose();
            }
        }
        Ok(out)
    }

    /// Permutation twirl of a dense state, in block form.
    pub fn project(&self, state: &FullState) -> Result<PIState> {
        let n = self.shape.n_qubits;
        if state.n_qubits() != n {
            return Err(Error::invalid("state size does not match basis"));
        }
        let blocks = self
            .shape
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, info)| {
                let mut acc = CMatrix::zeros(info.dim, info.dim);
                for v in &self.vectors[bi] {
                    let vc = v.map(|a| Complex64::new(a, 0.0));
                    acc += vc.transpose() * state.matrix() * &vc;
                }
                linalg::hermitian_part(&acc)
            })
            .collect();
        PIState::from_blocks_unchecked(n, blocks)
    }
}

/// Collective lowering operator `Σ_k |1⟩⟨0|_k` applied to a real vector.
fn lower(v: &[f64], n_qubits: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (x, &a) in v.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for q in 0..n_qubits {
            let bit = 1usize << q;
            if x & bit == 0 {
                out[x | bit] += a;
            }
        }
    }
    out
}

/// Dense representation `⊕_j (1/d_j) ⊗ B_j` in the computational basis.
pub fn embed_to_full(state: &PIState) -> Result<FullState> {
    CoupledBasis::new(state.n_qubits())?.embed(state)
}

/// Average of `Π ρ Π†` over all qubit permutations, in block form.
pub fn project_full_to_pi(state: &FullState) -> Result<PIState> {
    CoupledBasis::new(state.n_qubits())?.project(state)
}

/// Dense collective spin `S_k = Σ_i σ_k^(i) / 2`. Qubit 0 is the most
/// significant bit of the basis index.
pub fn collective_spin_dense(n_qubits: usize, axis: SpinAxis) -> Result<CMatrix> {
    if n_qubits == 0 || n_qubits > MAX_DENSE_QUBITS {
        return Err(Error::UnsupportedSize(format!(
            "dense operators are limited to 1..={MAX_DENSE_QUBITS} qubits"
        )));
    }
    let dim = 1usize << n_qubits;
    let mut out = CMatrix::zeros(dim, dim);
    for x in 0..dim {
        for q in 0..n_qubits {
            let bit = 1usize << q;
            let up = x & bit == 0;
            match axis {
                SpinAxis::Z => out[(x, x)] += Complex64::new(if up { 0.5 } else { -0.5 }, 0.0),
                SpinAxis::X => out[(x ^ bit, x)] += Complex64::new(0.5, 0.0),
                SpinAxis::Y => {
                    // σ_y|0⟩ = i|1⟩, σ_y|1⟩ = -i|0⟩
                    let c = if up { 0.5 } else { -0.5 };
                    out[(x ^ bit, x)] += Complex64::new(0.0, c);
                }
            }
        }
    }
    Ok(out)
}

/// Dense Dicke vector with `n` excitations.
pub fn dicke_vector(n_qubits: usize, n_excitations: usize) -> Result<CVector> {
    if n_qubits == 0 || n_qubits > MAX_DENSE_QUBITS {
        return Err(Error::UnsupportedSize(format!(
            "dense vectors are limited to 1..={MAX_DENSE_QUBITS} qubits"
        )));
    }
    if n_excitations > n_qubits {
        return Err(Error::invalid("excitation number exceeds qubit number"));
    }
    let dim = 1usize << n_qubits;
    let amp = 1.0 / binomial(n_qubits as u64, n_excitations as u64).sqrt();
    let mut v = CVector::from_element(dim, C_ZERO);
    for x in 0..dim {
        if (x as u32).count_ones() as usize == n_excitations {
            v[x] = Complex64::new(amp, 0.0);
        }
    }
    Ok(v)
}

/// Either representation of a density operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum State {
    Pi(PIState),
    Full(FullState),
}

impl State {
    pub fn n_qubits(&self) -> usize {
        match self {
            State::Pi(s) => s.n_qubits(),
            State::Full(s) => s.n_qubits(),
        }
    }

    /// Dense form, embedding PI states.
    pub fn to_full(&self) -> Result<FullState> {
        match self {
            State::Pi(s) => embed_to_full(s),
            State::Full(s) => Ok(s.clone()),
        }
    }

    /// Block form; dense states are twirled.
    pub fn to_pi(&self) -> Result<PIState> {
        match self {
            State::Pi(s) => Ok(s.clone()),
            State::Full(s) => project_full_to_pi(s),
        }
    }
}

impl From<PIState> for State {
    fn from(s: PIState) -> Self {
        State::Pi(s)
    }
}

impl From<FullState> for State {
    fn from(s: FullState) -> Self {
        State::Full(s)
    }
}

#[derive(Serialize, Deserialize)]
struct BlockJson {
    j: f64,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PIStateJson {
    n_qubits: usize,
    blocks: Vec<BlockJson>,
}

#[derive(Serialize, Deserialize)]
struct FullStateJson {
    n_qubits: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

fn split_row_major(m: &CMatrix) -> (Vec<f64>, Vec<f64>) {
    let mut re = Vec::with_capacity(m.len());
    let mut im = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            re.push(m[(r, c)].re);
            im.push(m[(r, c)].im);
        }
    }
    (re, im)
}

fn join_row_major(dim: usize, re: &[f64], im: &[f64]) -> Result<CMatrix> {
    if re.len() != dim * dim || im.len() != dim * dim {
        return Err(Error::Validation(format!(
            "expected {} entries for a {dim}x{dim} matrix, got re={} im={}",
            dim * dim,
            re.len(),
            im.len()
        )));
    }
    Ok(CMatrix::from_fn(dim, dim, |r, c| {
        Complex64::new(re[r * dim + c], im[r * dim + c])
    }))
}

impl Serialize for PIState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let blocks = self
            .shape
            .blocks
            .iter()
            .zip(&self.blocks)
            .map(|(info, b)| {
                let (re, im) = split_row_major(b);
                BlockJson {
                    j: info.spin.value(),
                    re,
                    im,
                }
            })
            .collect();
        PIStateJson {
            n_qubits: self.n_qubits(),
            blocks,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PIState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = PIStateJson::deserialize(d)?;
        let shape = block_shape(raw.n_qubits).map_err(D::Error::custom)?;
        let mut blocks = Vec::with_capacity(shape.blocks.len());
        for info in &shape.blocks {
            let entry = raw
                .blocks
                .iter()
                .find(|b| Spin::from_value(b.j).ok() == Some(info.spin))
                .ok_or_else(|| D::Error::custom(format!("missing block j={}", info.spin.value())))?;
            blocks.push(join_row_major(info.dim, &entry.re, &entry.im).map_err(D::Error::custom)?);
        }
        if raw.blocks.len() != shape.blocks.len() {
            return Err(D::Error::custom("unexpected extra blocks"));
        }
        PIState::from_blocks_unchecked(raw.n_qubits, blocks).map_err(D::Error::custom)
    }
}

impl Serialize for FullState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (re, im) = split_row_major(&self.matrix);
        FullStateJson {
            n_qubits: self.n_qubits,
            re,
            im,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FullState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = FullStateJson::deserialize(d)?;
        if raw.n_qubits == 0 || raw.n_qubits > MAX_DENSE_QUBITS {
            return Err(D::Error::custom("unsupported qubit number for a dense state"));
        }
        let m = join_row_major(1 << raw.n_qubits, &raw.re, &raw.im).map_err(D::Error::custom)?;
        FullState::from_matrix_unchecked(raw.n_qubits, m).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_qubit_shape() {
        let shape = block_shape(6).unwrap();
        assert_eq!(shape.dims(), vec![7, 5, 3, 1]);
        assert_eq!(shape.multiplicities(), vec![1, 5, 9, 5]);
        let total: u128 = shape
            .blocks
            .iter()
            .map(|b| b.multiplicity * b.dim as u128)
            .sum();
        assert_eq!(total, 64);
    }

    #[test]
    fn odd_shape_starts_at_half() {
        let shape = block_shape(5).unwrap();
        assert_eq!(shape.blocks.last().unwrap().spin, Spin::from_twice(1));
        assert_eq!(shape.dims(), vec![6, 4, 2]);
    }

    #[test]
    fn shape_range_checked() {
        assert!(matches!(block_shape(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(block_shape(65), Err(Error::InvalidArgument(_))));
        assert!(block_shape(64).is_ok());
    }

    #[test]
    fn dimension_sum_identity() {
        for n in 1..=12 {
            let shape = block_shape(n).unwrap();
            let total: u128 = shape
                .blocks
                .iter()
                .map(|b| b.multiplicity * b.dim as u128)
                .sum();
            assert_eq!(total, 1u128 << n);
            assert_eq!(shape.blocks[0].multiplicity, 1);
        }
    }

    #[test]
    fn counting() {
        assert_eq!(pi_parameter_count(6).unwrap(), 83);
        assert_eq!(pi_parameter_count(1).unwrap(), 3);
        assert_eq!(pi_parameter_count(2).unwrap(), 9);
        assert_eq!(setting_count(6).unwrap(), 28);
        assert_eq!(setting_count(1).unwrap(), 3);
        assert_eq!(setting_count(2).unwrap(), 6);
        for n in 1..=20 {
            let shape = block_shape(n).unwrap();
            assert_eq!(
                pi_parameter_count(n).unwrap(),
                shape.hermitian_parameter_count() - 1
            );
        }
    }

    #[test]
    fn wigner_identity_and_half_spin() {
        let half = Spin::from_twice(1);
        let id = wigner_rotation(half, 0.0, 0.0);
        assert!(linalg::frobenius(&(&id.matrix - CMatrix::identity(2, 2))) < 1e-14);

        // closed-form d^{1/2}(θ) = [[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]
        let theta = std::f64::consts::FRAC_PI_2;
        let d = wigner_rotation(half, theta, 0.0);
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(c, 0.0),
                Complex64::new(-s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(c, 0.0),
            ],
        );
        assert!(linalg::frobenius(&(&d.matrix - expected)) < 1e-14);
    }

    #[test]
    fn wigner_unitary_large_spin() {
        for two_j in 0..=20 {
            let spin = Spin::from_twice(two_j);
            let d = wigner_rotation(spin, 1.234, 4.321);
            let res = &d.matrix.adjoint() * &d.matrix - CMatrix::identity(spin.dim(), spin.dim());
            assert!(linalg::frobenius(&res) <= 1e-10, "j={}", spin.value());
        }
    }

    #[test]
    fn dicke_block_form() {
        let s = dicke_state_pi(6, 3).unwrap();
        let sym = s.symmetric_block();
        assert_eq!(sym[(3, 3)], linalg::C_ONE);
        assert!((linalg::frobenius(sym) - 1.0).abs() < 1e-15);
        for b in &s.blocks()[1..] {
            assert_eq!(linalg::frobenius(b), 0.0);
        }
        assert!(matches!(dicke_state_pi(6, 7), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn maximally_mixed_embeds_to_identity() {
        for n in 1..=6 {
            let full = embed_to_full(&PIState::maximally_mixed(n).unwrap()).unwrap();
            let dim = 1usize << n;
            let expected = CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0);
            assert!(linalg::frobenius(&(full.matrix() - expected)) < 1e-12);
        }
    }

    #[test]
    fn two_qubit_twirl_by_hand() {
        // |01⟩⟨01| averaged with |10⟩⟨10|
        let mut m = CMatrix::zeros(4, 4);
        m[(1, 1)] = linalg::C_ONE;
        let pi = project_full_to_pi(&FullState::new(2, m).unwrap()).unwrap();
        let triplet = pi.block(Spin::from_twice(2)).unwrap();
        let singlet = pi.block(Spin::from_twice(0)).unwrap();
        let mut expected = CMatrix::zeros(3, 3);
        expected[(1, 1)] = Complex64::new(0.5, 0.0);
        assert!(linalg::frobenius(&(triplet - expected)) < 1e-14);
        assert!((singlet[(0, 0)].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dense_limit_enforced() {
        let s = PIState::maximally_mixed(9).unwrap();
        assert!(matches!(embed_to_full(&s), Err(Error::UnsupportedSize(_))));
    }

    #[test]
    fn pi_state_json_round_trip() {
        let s = PIState::maximally_mixed(3).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: PIState = serde_json::from_str(&text).unwrap();
        assert_eq!(back.distance(&s), 0.0);
        assert!(text.contains("\"j\":1.5"));
    }

    #[test]
    fn invalid_state_rejected() {
        let mut b = CMatrix::zeros(2, 2);
        b[(0, 0)] = Complex64::new(1.5, 0.0);
        b[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(matches!(PIState::new(1, vec![b]), Err(Error::Validation(_))));
    }
}
