//! Brute-force dense references shared by the integration tests. Nothing
//! here goes through the block machinery of the library.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symtomo::measurements::Direction;
use symtomo::spin_rep::{block_shape, PIState};

pub type M = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pauli(axis: char) -> M {
    match axis {
        'I' => M::identity(2, 2),
        'X' => M::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        'Y' => M::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
        'Z' => M::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
        _ => panic!("unknown axis"),
    }
}

/// `n·σ` for a unit vector.
pub fn n_sigma(v: [f64; 3]) -> M {
    pauli('X') * c(v[0], 0.0) + pauli('Y') * c(v[1], 0.0) + pauli('Z') * c(v[2], 0.0)
}

/// `(1 ± n·σ)/2`; index 0 is the +1 eigenprojector.
pub fn eigenprojectors(v: [f64; 3]) -> [M; 2] {
    let ns = n_sigma(v);
    let id = M::identity(2, 2);
    [(&id + &ns) * c(0.5, 0.0), (&id - &ns) * c(0.5, 0.0)]
}

/// Kronecker product, first factor most significant.
pub fn kron_all(factors: &[M]) -> M {
    let mut out = M::identity(1, 1);
    for f in factors {
        out = out.kronecker(f);
    }
    out
}

/// Outcome bit of qubit `q` in basis index `x` (qubit 0 most significant).
pub fn bit(x: usize, q: usize, n: usize) -> usize {
    (x >> (n - 1 - q)) & 1
}

/// Probabilities of the number of `-1` outcomes when every qubit measures
/// `n·σ`, built from Kronecker products of single-qubit projectors.
pub fn dense_pi_probabilities(rho: &M, n: usize, dir: [f64; 3]) -> Vec<f64> {
    let proj = eigenprojectors(dir);
    let mut p = vec![0.0; n + 1];
    for x in 0..(1usize << n) {
        let factors: Vec<M> = (0..n).map(|q| proj[bit(x, q, n)].clone()).collect();
        let e = kron_all(&factors);
        p[x.count_ones() as usize] += (rho * e).trace().re;
    }
    p
}

/// Outcome probabilities of a Pauli-string measurement, one entry per
/// bitstring with bit 1 for the `-1` eigenvalue.
pub fn dense_pauli_probabilities(rho: &M, label: &str) -> Vec<f64> {
    let n = label.len();
    let axes: Vec<[f64; 3]> = label
        .chars()
        .map(|a| match a {
            'X' => [1.0, 0.0, 0.0],
            'Y' => [0.0, 1.0, 0.0],
            'Z' => [0.0, 0.0, 1.0],
            _ => panic!("bad label"),
        })
        .collect();
    (0..(1usize << n))
        .map(|x| {
            let factors: Vec<M> = (0..n).map(|q| eigenprojectors(axes[q])[bit(x, q, n)].clone()).collect();
            (rho * kron_all(&factors)).trace().re
        })
        .collect()
}

/// `|D_N^(k)⟩` by explicit symmetrization: equal amplitude on every string
/// with `k` ones.
pub fn dicke_dense(n: usize, k: usize) -> Vec<Complex64> {
    let strings: Vec<usize> = (0..(1usize << n)).filter(|x| x.count_ones() as usize == k).collect();
    let amp = 1.0 / (strings.len() as f64).sqrt();
    let mut v = vec![c(0.0, 0.0); 1 << n];
    for x in strings {
        v[x] = c(amp, 0.0);
    }
    v
}

pub fn projector(v: &[Complex64]) -> M {
    let col = DMatrix::from_column_slice(v.len(), 1, v);
    &col * col.adjoint()
}

/// `S_k = Σ_i σ_k^(i)/2` from Kronecker products.
pub fn collective_spin(n: usize, axis: char) -> M {
    let dim = 1usize << n;
    let mut out = M::zeros(dim, dim);
    for q in 0..n {
        let factors: Vec<M> = (0..n)
            .map(|i| if i == q { pauli(axis) * c(0.5, 0.0) } else { M::identity(2, 2) })
            .collect();
        out += kron_all(&factors);
    }
    out
}

/// Permutation of qubit positions as a basis-permutation matrix.
pub fn permutation_matrix(perm: &[usize]) -> M {
    let n = perm.len();
    let dim = 1usize << n;
    let mut p = M::zeros(dim, dim);
    for x in 0..dim {
        let mut y = 0usize;
        for q in 0..n {
            if bit(x, q, n) == 1 {
                y |= 1 << (n - 1 - perm[q]);
            }
        }
        p[(y, x)] = c(1.0, 0.0);
    }
    p
}

pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, left: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..left.len() {
            let v = left.remove(i);
            prefix.push(v);
            rec(prefix, left, out);
            prefix.pop();
            left.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

/// Average of `Π ρ Π†` over all `N!` qubit permutations.
pub fn brute_force_twirl(rho: &M, n: usize) -> M {
    let perms = all_permutations(n);
    let mut acc = M::zeros(rho.nrows(), rho.ncols());
    for p in &perms {
        let pm = permutation_matrix(p);
        acc += &pm * rho * pm.adjoint();
    }
    acc / c(perms.len() as f64, 0.0)
}

fn eig(m: &M) -> (Vec<f64>, M) {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let e = h.symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

fn apply_spectrum(m: &M, f: impl Fn(f64) -> f64) -> M {
    let (vals, vecs) = eig(m);
    let d = M::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| c(f(v), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

/// Dense Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))²`.
pub fn dense_fidelity(a: &M, b: &M) -> f64 {
    let sa = apply_spectrum(a, |v| v.max(0.0).sqrt());
    let inner = &sa * b * &sa;
    let (vals, _) = eig(&inner);
    let root: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    root * root
}

/// Dense SLD Fisher information `2 Σ (a_k - a_l)²/(a_k + a_l) |H_kl|²`.
pub fn dense_qfi(rho: &M, h: &M) -> f64 {
    let (vals, vecs) = eig(rho);
    let hk = vecs.adjoint() * h * &vecs;
    let mut acc = 0.0;
    for k in 0..vals.len() {
        for l in 0..vals.len() {
            let (a, b) = (vals[k].max(0.0), vals[l].max(0.0));
            if a + b > 1e-12 {
                acc += (a - b).powi(2) / (a + b) * hk[(k, l)].norm_sqr();
            }
        }
    }
    2.0 * acc
}

pub fn frob(m: &M) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn random_complex_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> M {
    M::from_fn(rows, cols, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

/// Random density matrix `G G† / Tr` of full rank.
pub fn random_density<R: Rng>(rng: &mut R, dim: usize) -> M {
    let g = random_complex_matrix(rng, dim, dim);
    let m = &g * g.adjoint() + M::identity(dim, dim) * c(1e-3, 0.0);
    let t = m.trace();
    m / t
}

pub fn random_pure<R: Rng>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..dim).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> M {
    let g = random_complex_matrix(rng, dim, dim);
    (&g + g.adjoint()) * c(0.5, 0.0)
}

/// Random PI state with full-rank blocks and random block weights.
pub fn random_pi_state<R: Rng>(rng: &mut R, n: usize) -> PIState {
    let shape = block_shape(n).unwrap();
    let weights: Vec<f64> = shape.blocks.iter().map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = weights.iter().sum();
    let blocks = shape
        .blocks
        .iter()
        .zip(&weights)
        .map(|(b, w)| random_density(rng, b.dim) * c(w / total, 0.0))
        .collect();
    PIState::new(n, blocks).unwrap()
}

pub fn random_direction<R: Rng>(rng: &mut R) -> Direction {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    Direction::from_angles(z.acos(), phi).unwrap()
}

/// Dykstra's alternating projections onto the PSD cone and the unit-trace
/// hyperplane; slow but independent of the eigenvalue-simplex route.
pub fn dykstra_projection(y: &M, iterations: usize) -> M {
    let dim = y.nrows();
    let mut x = y.clone();
    let mut p = M::zeros(dim, dim);
    let mut q = M::zeros(dim, dim);
    for _ in 0..iterations {
        let a = &x + &p;
        let psd = apply_spectrum(&a, |v| v.max(0.0));
        p = &a - &psd;
        let b = &psd + &q;
        let shift = (b.trace().re - 1.0) / dim as f64;
        let aff = &b - M::identity(dim, dim) * c(shift, 0.0);
        q = &b - &aff;
        x = aff;
    }
    x
}

/// Probability vectors scaled to integer counts without sampling noise.
pub fn exact_counts(probs: &[Vec<f64>], total: f64) -> Vec<Vec<u64>> {
    probs
        .iter()
        .map(|p| p.iter().map(|&x| (x * total).round().max(0.0) as u64).collect())
        .collect()
}
