//! Dense complex linear algebra used across the crate.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>` (column-major). Large products
//! go through `matrixmultiply::zgemm`; factorizations go through nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `a * b` through the blocked zgemm kernel.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut out = CMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    // SAFETY: Complex64 is repr(C) {re, im}, layout-identical to [f64; 2];
    // all three buffers are column-major with the strides given.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    out
}

/// `a^H * b` (conjugate transpose of `a` times `b`).
pub fn matmul_adjoint_left(a: &CMat, b: &CMat) -> CMat {
    matmul(&a.adjoint(), b)
}

/// Frobenius norm of `m - I`.
pub fn identity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            acc += (m[(i, j)] - target).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Max-entry distance of `g g^* ` from the identity.
pub fn unitarity_defect(g: &CMat) -> f64 {
    let p = g * g.adjoint();
    max_abs(&(p - CMat::identity(g.nrows(), g.ncols())))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

fn is_diagonal(m: &CMat) -> bool {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j && m[(i, j)] != C64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

/// Singular values in descending order. Diagonal inputs are read off exactly.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = if is_diagonal(m) {
        (0..k).map(|i| m[(i, i)].norm()).collect()
    } else {
        m.clone().singular_values().iter().copied().collect()
    };
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Hermitian part check: `‖h - h^*‖_max <= tol * max(1, ‖h‖_max)`.
pub fn is_hermitian(h: &CMat, tol: f64) -> bool {
    if h.nrows() != h.ncols() {
        return false;
    }
    let scale = max_abs(h).max(1.0);
    let n = h.nrows();
    for j in 0..n {
        for i in 0..=j {
            if (h[(i, j)] - h[(j, i)].conj()).norm() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    let n = h.nrows();
    if n == 0 {
        return Vec::new();
    }
    if is_diagonal(h) {
        let mut ev: Vec<f64> = (0..n).map(|i| h[(i, i)].re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        return ev;
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// `tr exp(-gamma h)` for Hermitian `h`, summed in ascending eigenvalue order.
pub fn heat_trace_hermitian(h: &CMat, gamma: f64) -> f64 {
    hermitian_eigenvalues(h)
        .iter()
        .map(|&lam| (-gamma * lam).exp())
        .sum()
}

/// Matrix exponential by scaling and squaring with a Taylor core.
///
/// Intended for the small anti-Hermitian generators of the Lie algebras.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5_f64.powi(squarings));
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for k in 1..=18 {
        term = (&term * &scaled).scale(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Determinant of a small complex matrix by LU.
pub fn det(m: &CMat) -> C64 {
    m.clone().determinant()
}
