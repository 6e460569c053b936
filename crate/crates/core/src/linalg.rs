//! Small dense linear-algebra helpers shared by the state, solver and
//! analysis code. Everything works on `nalgebra` complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Binomial coefficient as `f64`. Exact for every argument used here (n ≤ 64).
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Binomial coefficient as an integer, `None` on overflow.
pub fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(acc)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues are returned in the
/// order produced by the solver (not sorted); columns of the second value are
/// the matching eigenvectors.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    if m.nrows() == 0 {
        return (Vec::new(), m.clone());
    }
    let eig = hermitian_part(m).symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Rebuilds `V diag(values) V†`.
pub fn from_eigen(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v);
    }
    &scaled * vectors.adjoint()
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).0.into_iter().fold(f64::INFINITY, f64::min)
}

/// Principal square root of a PSD matrix; negative round-off eigenvalues are
/// clipped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let roots: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    from_eigen(&roots, &vecs)
}

/// `Tr sqrt(sqrt(a) b sqrt(a))` for PSD `a`, `b`.
pub fn root_fidelity(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let sa = psd_sqrt(a);
    let inner = &sa * b * &sa;
    eigh(&inner).0.iter().map(|v| v.max(0.0).sqrt()).sum()
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Real Frobenius inner product `Re Tr(a† b)`.
pub fn inner_re(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    frobenius(&(m - m.adjoint()))
}

/// `v† m v`, real part.
pub fn quadratic_form(m: &CMatrix, v: &CVector) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for r in 0..n {
        let mut row = C_ZERO;
        for c in 0..n {
            row += m[(r, c)] * v[c];
        }
        acc += (v[r].conj() * row).re;
    }
    acc
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k as f64 + 1.0);
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Numerical rank from singular values, relative threshold.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}
