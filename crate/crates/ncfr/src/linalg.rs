//! Small dense helpers over complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{NcError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest size `n_z * n_w` solved through the Kronecker system.
pub const STEIN_DIRECT_MAX: usize = 1024;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Spectral norm.
pub fn norm2(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvals_hermitian(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn lambda_max(m: &CMat) -> f64 {
    eigvals_hermitian(m).last().copied().unwrap_or(0.0)
}

pub fn lambda_min(m: &CMat) -> f64 {
    eigvals_hermitian(m).first().copied().unwrap_or(0.0)
}

/// `f(M)` for Hermitian `M` through its eigendecomposition.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let eig = hermitian_part(m).symmetric_eigen();
    let u = &eig.eigenvectors;
    let dvals = CMat::from_diagonal(&DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&x| cr(f(x))),
    ));
    u * dvals * u.adjoint()
}

/// Eigenvalues of a general complex matrix (diagonal of its Schur form).
pub fn eigvals_general(m: &CMat) -> Vec<Complex64> {
    if m.is_empty() {
        return Vec::new();
    }
    let (_, t) = m.clone().schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

pub fn spectral_radius(m: &CMat) -> f64 {
    eigvals_general(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Orthonormal basis of the column span, keeping singular values above
/// `tol * σ_max`.
pub fn orth(k: &CMat, tol: f64) -> CMat {
    let n = k.nrows();
    if k.ncols() == 0 || n == 0 {
        return CMat::zeros(n, 0);
    }
    let svd = k.clone().svd(true, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return CMat::zeros(n, 0);
    }
    let u = svd.u.expect("left vectors requested");
    let mut idx: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol * smax).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let mut q = CMat::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        q.set_column(c, &u.column(i));
    }
    q
}

pub fn hstack(blocks: &[CMat], nrows: usize) -> CMat {
    let ncols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(nrows, ncols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (nrows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    out
}

pub fn col(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

/// Solves `A x = b`, failing when `A` is numerically singular.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() == 0 {
        return Ok(CMat::zeros(0, b.ncols()));
    }
    let lu = a.clone().lu();
    lu.solve(b).ok_or(NcError::SingularPencil { cond: f64::INFINITY })
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    solve(a, &CMat::identity(a.nrows(), a.nrows()))
}

/// Ratio of extreme singular values.
pub fn condition(a: &CMat) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let s = a.clone().svd(false, false).singular_values;
    let smin = s.min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s.max() / smin
    }
}

/// `Σ_j Z_j Q W_j*`.
pub fn stein_map(z: &[CMat], q: &CMat, w: &[CMat]) -> CMat {
    let mut out = CMat::zeros(q.nrows(), q.ncols());
    for (zj, wj) in z.iter().zip(w) {
        out += zj * q * wj.adjoint();
    }
    out
}

/// Solves `Q − Σ_j Z_j Q W_j* = P` without any contractivity check.
///
/// Small systems go through the Kronecker form; larger ones iterate the
/// fixed-point series.
pub fn stein_solve_raw(z: &[CMat], w: &[CMat], p: &CMat) -> Result<CMat> {
    let (nz, nw) = p.shape();
    if nz == 0 || nw == 0 {
        return Ok(p.clone());
    }
    if nz * nw <= STEIN_DIRECT_MAX {
        let mut m = CMat::identity(nz * nw, nz * nw);
        for (zj, wj) in z.iter().zip(w) {
            // vec(Z Q W*) = (conj(W) ⊗ Z) vec(Q), column-major
            m -= kron(&wj.map(|x| x.conj()), zj);
        }
        let rhs = CMat::from_column_slice(nz * nw, 1, p.as_slice());
        let x = solve(&m, &rhs)?;
        return Ok(CMat::from_column_slice(nz, nw, x.as_slice()));
    }
    let mut q = p.clone();
    let scale = max_abs(p).max(f64::MIN_POSITIVE);
    for _ in 0..200_000 {
        let next = p + stein_map(z, &q, w);
        let delta = max_abs(&(&next - &q));
        q = next;
        if delta <= 1e-16 * scale.max(max_abs(&q)) {
            return Ok(q);
        }
        if !delta.is_finite() {
            break;
        }
    }
    Err(NcError::NotContractive("Stein iteration did not converge".into()))
}

/// Relative residual of a Stein solution.
pub fn stein_residual(z: &[CMat], w: &[CMat], p: &CMat, q: &CMat) -> f64 {
    let r = q - stein_map(z, q, w) - p;
    max_abs(&r) / max_abs(q).max(f64::MIN_POSITIVE)
}
