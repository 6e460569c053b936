//! Measurement settings, effect operators and outcome probabilities.
//!
//! PI settings measure every qubit along a common Bloch direction and record
//! only the number `n` of `-1` outcomes. The effect for outcome `n` is the
//! projector onto the rotated collective-spin eigenspace `m = N/2 - n`; in
//! block `j` it is the rank-one operator `D^j |j,m⟩⟨j,m| D^j†`, absent when
//! `|m| > j`. These effects sum to the identity (trace `C(N,n)`), i.e. they
//! are `C(N,n)` times the permutation-averaged product projectors.
//!
//! Full settings assign one Pauli operator per qubit and record the complete
//! bit string.

pub mod pauli;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CVector};
use crate::spin_rep::{self, block_shape, wigner_rotation, BlockShape, FullState, PIState};

/// Unit measurement direction on the Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    theta: f64,
    phi: f64,
}

impl Direction {
    pub fn from_angles(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::invalid("direction angles must be finite"));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::invalid(format!("theta={theta} outside [0, pi]")));
        }
        Ok(Direction {
            theta,
            phi: phi.rem_euclid(2.0 * PI),
        })
    }

    /// From a Cartesian vector, which must be a unit vector within 1e-9.
    pub fn from_vector(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("direction has norm {norm}, expected 1")));
        }
        let theta = (z / norm).clamp(-1.0, 1.0).acos();
        let phi = if x == 0.0 && y == 0.0 { 0.0 } else { y.atan2(x) };
        Direction::from_angles(theta, phi)
    }

    pub fn x_axis() -> Self {
        Direction {
            theta: PI / 2.0,
            phi: 0.0,
        }
    }

    pub fn y_axis() -> Self {
        Direction {
            theta: PI / 2.0,
            phi: PI / 2.0,
        }
    }

    pub fn z_axis() -> Self {
        Direction {
            theta: 0.0,
            phi: 0.0,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn vector(&self) -> [f64; 3] {
        let s = self.theta.sin();
        [s * self.phi.cos(), s * self.phi.sin(), self.theta.cos()]
    }

    pub fn angle_to(&self, other: &Direction) -> f64 {
        let (a, b) = (self.vector(), other.vector());
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DirectionJson {
    Angles { theta: f64, phi: f64 },
    Vector { x: f64, y: f64, z: f64 },
}

impl Serialize for Direction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DirectionJson::Angles {
            theta: self.theta,
            phi: self.phi,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match DirectionJson::deserialize(d)? {
            DirectionJson::Angles { theta, phi } => Direction::from_angles(theta, phi),
            DirectionJson::Vector { x, y, z } => Direction::from_vector(x, y, z),
        }
        .map_err(D::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// One Pauli operator per qubit, qubit 0 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'X' | 'x' => Ok(Pauli::X),
                'Y' | 'y' => Ok(Pauli::Y),
                'Z' | 'z' => Ok(Pauli::Z),
                other => Err(Error::invalid(format!("invalid Pauli label character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            let c = match p {
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Pi,
    Full,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Pi => "pi",
            Scheme::Full => "full",
        })
    }
}

/// Minimum angular separation between PI directions.
pub const MIN_DIRECTION_SEPARATION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum SettingSet {
    Pi(Vec<Direction>),
    Full(Vec<PauliString>),
}

impl SettingSet {
    pub fn pi(directions: Vec<Direction>) -> Result<Self> {
        for (a, da) in directions.iter().enumerate() {
            for (b, db) in directions.iter().enumerate().skip(a + 1) {
                if da.angle_to(db) <= MIN_DIRECTION_SEPARATION {
                    return Err(Error::invalid(format!(
                        "directions {a} and {b} coincide"
                    )));
                }
            }
        }
        Ok(SettingSet::Pi(directions))
    }

    pub fn full(labels: Vec<PauliString>, n_qubits: usize) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (i, l) in labels.iter().enumerate() {
            if l.len() != n_qubits {
                return Err(Error::invalid(format!(
                    "Pauli label {i} ({l}) has length {}, expected {n_qubits}",
                    l.len()
                )));
            }
            if !seen.insert(l.clone()) {
                return Err(Error::invalid(format!("duplicate Pauli label {l}")));
            }
        }
        Ok(SettingSet::Full(labels))
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            SettingSet::Pi(_) => Scheme::Pi,
            SettingSet::Full(_) => Scheme::Full,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SettingSet::Pi(d) => d.len(),
            SettingSet::Full(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Settings at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> SettingSet {
        match self {
            SettingSet::Pi(d) => SettingSet::Pi(indices.iter().map(|&i| d[i]).collect()),
            SettingSet::Full(l) => SettingSet::Full(indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    pub fn directions(&self) -> Option<&[Direction]> {
        match self {
            SettingSet::Pi(d) => Some(d),
            SettingSet::Full(_) => None,
        }
    }

    pub fn labels(&self) -> Option<&[PauliString]> {
        match self {
            SettingSet::Pi(_) => None,
            SettingSet::Full(l) => Some(l),
        }
    }
}

/// Points of a Fibonacci lattice on the open upper hemisphere.
fn fibonacci_hemisphere(count: usize, offset: f64) -> Vec<Direction> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (i as f64 + offset) / count as f64;
            let phi = (i as f64 * golden).rem_euclid(2.0 * PI);
            Direction {
                theta: z.clamp(-1.0, 1.0).acos(),
                phi,
            }
        })
        .collect()
}

/// Largest N for which the default PI directions are rank-checked.
pub const RANK_CHECK_MAX_QUBITS: usize = 12;

/// `C(N+2, N)` PI directions: the z, x and y axes followed by a Fibonacci
/// lattice on the upper hemisphere.
pub fn default_pi_settings(n_qubits: usize) -> Result<SettingSet> {
    let total = spin_rep::setting_count(n_qubits)?;
    let shape = block_shape(n_qubits)?;
    for offset in [0.5, 0.37, 0.61, 0.23] {
        let mut dirs = vec![Direction::z_axis(), Direction::x_axis(), Direction::y_axis()];
        dirs.extend(fibonacci_hemisphere(total - 3, offset));
        let settings = SettingSet::pi(dirs)?;
        if n_qubits > RANK_CHECK_MAX_QUBITS {
            return Ok(settings);
        }
        let (rank, params) = design_rank(&shape, &settings)?;
        if rank == params {
            return Ok(settings);
        }
        log::debug!("direction lattice offset {offset} gives rank {rank} < {params}");
    }
    Err(Error::Internal(format!(
        "could not generate a full-rank direction set for {n_qubits} qubits"
    )))
}

/// All `3^N` Pauli labels in lexicographic order (X < Y < Z).
pub fn default_full_settings(n_qubits: usize) -> Result<SettingSet> {
    if n_qubits == 0 || n_qubits > spin_rep::MAX_DENSE_QUBITS {
        return Err(Error::UnsupportedSize(format!(
            "full settings are limited to 1..={} qubits",
            spin_rep::MAX_DENSE_QUBITS
        )));
    }
    let count = 3usize.pow(n_qubits as u32);
    let labels = (0..count)
        .map(|mut idx| {
            let mut v = vec![Pauli::X; n_qubits];
            for slot in v.iter_mut().rev() {
                *slot = [Pauli::X, Pauli::Y, Pauli::Z][idx % 3];
                idx /= 3;
            }
            PauliString(v)
        })
        .collect();
    SettingSet::full(labels, n_qubits)
}

/// Effect of outcome `n` of a PI setting in POVM normalization. Block `i`
/// holds the rank-one factor `u` (effect `u u†`), or `None` when the block
/// does not contribute.
#[derive(Clone, Debug)]
pub struct PIEffect {
    pub outcome: usize,
    pub factors: Vec<Option<CVector>>,
}

impl PIEffect {
    pub fn block_matrix(&self, block: usize, dim: usize) -> linalg::CMatrix {
        match &self.factors[block] {
            Some(u) => u * u.adjoint(),
            None => linalg::CMatrix::zeros(dim, dim),
        }
    }
}

/// Block column index of outcome `n` inside spin block `two_j`, if present.
pub(crate) fn outcome_column(n_qubits: usize, two_j: u32, n: usize) -> Option<usize> {
    let k = (n_qubits - two_j as usize) / 2;
    (n >= k && n - k <= two_j as usize).then(|| n - k)
}

pub fn pi_effect(direction: &Direction, n_qubits: usize, outcome: usize) -> Result<PIEffect> {
    if outcome > n_qubits {
        return Err(Error::invalid(format!(
            "outcome {outcome} exceeds qubit number {n_qubits}"
        )));
    }
    let shape = block_shape(n_qubits)?;
    let factors = shape
        .blocks
        .iter()
        .map(|b| {
            outcome_column(n_qubits, b.spin.twice(), outcome).map(|col| {
                wigner_rotation(b.spin, direction.theta, direction.phi).column(col)
            })
        })
        .collect();
    Ok(PIEffect { outcome, factors })
}

/// Rotation matrices of every block for every setting; effect factors are
/// their columns.
#[derive(Clone, Debug)]
pub struct PiMeasurementModel {
    shape: BlockShape,
    rotations: Vec<Vec<linalg::CMatrix>>,
}

impl PiMeasurementModel {
    pub fn new(shape: &BlockShape, directions: &[Direction]) -> Self {
        let rotations = directions
            .iter()
            .map(|d| {
                shape
                    .blocks
                    .iter()
                    .map(|b| wigner_rotation(b.spin, d.theta, d.phi).matrix)
                    .collect()
            })
            .collect();
        PiMeasurementModel {
            shape: shape.clone(),
            rotations,
        }
    }

    pub fn shape(&self) -> &BlockShape {
        &self.shape
    }

    pub fn n_settings(&self) -> usize {
        self.rotations.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.shape.n_qubits + 1
    }

    /// Rotation matrix of block `b` for setting `s`.
    pub fn rotation(&self, s: usize, b: usize) -> &linalg::CMatrix {
        &self.rotations[s][b]
    }

    /// Probabilities `Tr(B_j E)` summed over blocks for one setting.
    pub fn setting_probabilities(&self, blocks: &[linalg::CMatrix], s: usize) -> Vec<f64> {
        let n = self.shape.n_qubits;
        let mut p = vec![0.0; n + 1];
        for (bi, info) in self.shape.blocks.iter().enumerate() {
            let k = (n - info.spin.twice() as usize) / 2;
            let rot = &self.rotations[s][bi];
            // diag(D† B D), column by column
            let bd = &blocks[bi] * rot;
            for col in 0..info.dim {
                p[k + col] += rot.column(col).dotc(&bd.column(col)).re;
            }
        }
        p
    }

    /// Adds `Σ_n w_n E^n` for setting `s` into per-block accumulators.
    pub fn accumulate_adjoint(&self, weights: &[f64], s: usize, out: &mut [linalg::CMatrix]) {
        let n = self.shape.n_qubits;
        for (bi, info) in self.shape.blocks.iter().enumerate() {
            let k = (n - info.spin.twice() as usize) / 2;
            let rot = &self.rotations[s][bi];
            let mut scaled = rot.clone();
            for col in 0..info.dim {
                scaled.column_mut(col).scale_mut(weights[k + col]);
            }
            out[bi] += scaled * rot.adjoint();
        }
    }

    /// Real design matrix mapping Hermitian block parameters to outcome
    /// probabilities. Parameter order per block: diagonal entries, then
    /// `Re B_kl`, `Im B_kl` for `k < l`.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let n = self.shape.n_qubits;
        let rows = self.n_settings() * (n + 1);
        let cols = self.shape.hermitian_parameter_count();
        let mut a = DMatrix::<f64>::zeros(rows, cols);
        for s in 0..self.n_settings() {
            let mut offset = 0;
            for (bi, info) in self.shape.blocks.iter().enumerate() {
                let d = info.dim;
                let k = (n - info.spin.twice() as usize) / 2;
                let rot = &self.rotations[s][bi];
                for col in 0..d {
                    let row = s * (n + 1) + k + col;
                    let u = rot.column(col);
                    let mut p = offset;
                    for a_idx in 0..d {
                        a[(row, p)] = u[a_idx].norm_sqr();
                        p += 1;
                    }
                    for a_idx in 0..d {
                        for b_idx in a_idx + 1..d {
                            let z = u[a_idx].conj() * u[b_idx];
                            a[(row, p)] = 2.0 * z.re;
                            a[(row, p + 1)] = -2.0 * z.im;
                            p += 2;
                        }
                    }
                }
                offset += d * d;
            }
        }
        a
    }

    /// Splits a parameter vector of [`Self::design_matrix`] back into blocks.
    pub fn blocks_from_parameters(&self, params: &[f64]) -> Vec<linalg::CMatrix> {
        let mut offset = 0;
        self.shape
            .blocks
            .iter()
            .map(|info| {
                let d = info.dim;
                let mut m = linalg::CMatrix::zeros(d, d);
                let mut p = offset;
                for a in 0..d {
                    m[(a, a)] = num_complex::Complex64::new(params[p], 0.0);
                    p += 1;
                }
                for a in 0..d {
                    for b in a + 1..d {
                        let z = num_complex::Complex64::new(params[p], params[p + 1]);
                        m[(a, b)] = z;
                        m[(b, a)] = z.conj();
                        p += 2;
                    }
                }
                offset += d * d;
                m
            })
            .collect()
    }
}

/// Numerical rank of the design matrix restricted to trace-free parameter
/// changes, together with the number of such parameters (`C(N+3,N) - 1`).
pub fn design_rank(shape: &BlockShape, settings: &SettingSet) -> Result<(usize, usize)> {
    let dirs = settings
        .directions()
        .ok_or_else(|| Error::invalid("design rank is defined for PI settings"))?;
    let model = PiMeasurementModel::new(shape, dirs);
    let a = model.design_matrix();
    // diagonal parameters are pooled across blocks; replace them by the
    // differences of consecutive diagonal entries, which span the trace-free
    // diagonal directions
    let mut diag_cols = Vec::new();
    let mut other_cols = Vec::new();
    let mut offset = 0;
    for info in &shape.blocks {
        let d = info.dim;
        diag_cols.extend(offset..offset + d);
        other_cols.extend(offset + d..offset + d * d);
        offset += d * d;
    }
    let params = a.ncols() - 1;
    let mut reduced = DMatrix::<f64>::zeros(a.nrows(), params);
    for (c, &src) in other_cols.iter().enumerate() {
        reduced.set_column(c, &a.column(src));
    }
    for w in 0..diag_cols.len() - 1 {
        let col = a.column(diag_cols[w]) - a.column(diag_cols[w + 1]);
        reduced.set_column(other_cols.len() + w, &col);
    }
    Ok((linalg::numerical_rank(&reduced, 1e-10), params))
}

/// Outcome probabilities `p[s][n]` of a PI state.
pub fn pi_probabilities(state: &PIState, settings: &SettingSet) -> Result<Vec<Vec<f64>>> {
    let dirs = settings
        .directions()
        .ok_or_else(|| Error::invalid("PI probabilities need PI settings"))?;
    let model = PiMeasurementModel::new(state.shape(), dirs);
    Ok((0..dirs.len())
        .map(|s| model.setting_probabilities(state.blocks(), s))
        .collect())
}

/// Outcome probabilities `p[s][x]` of a dense state under Pauli settings.
/// Outcome `x` is a bit string with qubit 0 most significant; bit value 1
/// is the `-1` eigenvalue.
pub fn full_probabilities(state: &FullState, settings: &SettingSet) -> Result<Vec<Vec<f64>>> {
    let labels = settings
        .labels()
        .ok_or_else(|| Error::invalid("full probabilities need Pauli settings"))?;
    let n = state.n_qubits();
    if let Some(bad) = labels.iter().find(|l| l.len() != n) {
        return Err(Error::invalid(format!(
            "Pauli label {bad} does not match {n} qubits"
        )));
    }
    let coeffs = pauli::pauli_coefficients(state.matrix(), n);
    let tables = pauli::PauliTables::new(labels, n);
    Ok((0..labels.len()).map(|s| tables.probabilities(&coeffs, s)).collect())
}

/// Lower bound on the weight of the symmetric block from the
/// `σ_x^⊗N`, `σ_y^⊗N`, `σ_z^⊗N` outcome counts.
///
/// Uses `S² ≤ s₁ P_s + s₂ (1 - P_s)` with `s₁ = (N/2)(N/2+1)` and
/// `s₂ = (N/2-1)(N/2)` the two largest eigenvalues of the total spin.
pub fn symmetric_overlap_bound(counts_x: &[u64], counts_y: &[u64], counts_z: &[u64]) -> Result<f64> {
    let freqs = |c: &[u64]| -> Result<Vec<f64>> {
        let total: u64 = c.iter().sum();
        if total == 0 {
            return Err(Error::invalid("count vector has zero total"));
        }
        Ok(c.iter().map(|&k| k as f64 / total as f64).collect())
    };
    symmetric_overlap_bound_from_frequencies(&freqs(counts_x)?, &freqs(counts_y)?, &freqs(counts_z)?)
}

/// As [`symmetric_overlap_bound`] from outcome frequencies (or exact
/// probabilities) of the x, y and z settings.
pub fn symmetric_overlap_bound_from_frequencies(fx: &[f64], fy: &[f64], fz: &[f64]) -> Result<f64> {
    let len = fx.len();
    if len < 2 || fy.len() != len || fz.len() != len {
        return Err(Error::invalid(
            "outcome vectors must share a length of N+1 >= 2",
        ));
    }
    let half = (len - 1) as f64 / 2.0;
    let mut total_second_moment = 0.0;
    for f in [fx, fy, fz] {
        total_second_moment += f
            .iter()
            .enumerate()
            .map(|(k, &p)| p * (half - k as f64).powi(2))
            .sum::<f64>();
    }
    let s1 = half * (half + 1.0);
    let s2 = (half - 1.0) * half;
    Ok((total_second_moment - s2) / (s1 - s2))
}
