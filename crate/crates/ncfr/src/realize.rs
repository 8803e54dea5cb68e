//! State-space realizations of NC rational functions regular at 0.
//!
//! Coefficient convention: `c_∅ = D` and `c_{ω·j} = C A^ω B_j` with
//! `A^ω = A_{i1} ⋯ A_{ik}` for `ω = i1⋯ik`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NcError, Result};
use crate::freecore::{level_offset, FreeSeries, Word};
use crate::linalg::{self, c, cr, CMat, CVec, ONE, ZERO};

/// Relative singular-value threshold used for minimization.
pub const RANK_TOL: f64 = 1e-10;
/// Pencils with a larger condition estimate are treated as singular.
pub const PENCIL_COND_CAP: f64 = 1e12;

/// A `d`-tuple of square matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    z: Vec<CMat>,
    bound: Option<f64>,
}

impl MatrixTuple {
    pub fn new(z: Vec<CMat>) -> Result<Self> {
        if z.is_empty() {
            return Err(NcError::InvalidInput("empty matrix tuple".into()));
        }
        let n = z[0].nrows();
        if z.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(NcError::DimensionMismatch("tuple entries must be square of equal size".into()));
        }
        Ok(MatrixTuple { z, bound: None })
    }

    /// Tuple of 1×1 matrices.
    pub fn scalars(vals: &[Complex64]) -> Result<Self> {
        Self::new(vals.iter().map(|&v| CMat::from_element(1, 1, v)).collect())
    }

    pub fn zeros(d: usize, n: usize) -> Self {
        MatrixTuple { z: vec![CMat::zeros(n, n); d], bound: Some(0.0) }
    }

    /// Random strict row contraction with `‖Σ Z_j Z_j*‖ = radius²`.
    pub fn random_strict<R: Rng>(rng: &mut R, d: usize, n: usize, radius: f64) -> Self {
        let z: Vec<CMat> = (0..d).map(|_| random_matrix(rng, n, n)).collect();
        let t = MatrixTuple { z, bound: None };
        let s = t.row_norm_sq().sqrt();
        let k = if s > 0.0 { radius / s } else { 0.0 };
        let z = t.z.iter().map(|m| m * cr(k)).collect();
        MatrixTuple { z, bound: Some(radius * radius) }
    }

    pub fn d(&self) -> usize {
        self.z.len()
    }

    pub fn n(&self) -> usize {
        self.z[0].nrows()
    }

    pub fn mats(&self) -> &[CMat] {
        &self.z
    }

    pub fn get(&self, j: usize) -> &CMat {
        &self.z[j]
    }

    /// Certified bound on `‖Σ Z_j Z_j*‖`, when one was recorded.
    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn row_gram(&self) -> CMat {
        let n = self.n();
        self.z.iter().fold(CMat::zeros(n, n), |acc, m| acc + m * m.adjoint())
    }

    pub fn row_norm_sq(&self) -> f64 {
        linalg::lambda_max(&self.row_gram())
    }

    pub fn is_strict(&self) -> bool {
        self.row_norm_sq() < 1.0
    }

    pub fn adjoint(&self) -> Self {
        MatrixTuple { z: self.z.iter().map(|m| m.adjoint()).collect(), bound: None }
    }

    /// `Z^ω = Z_{i1} ⋯ Z_{ik}`.
    pub fn power(&self, w: &Word) -> CMat {
        let n = self.n();
        w.letters().iter().fold(CMat::identity(n, n), |acc, &l| acc * &self.z[l as usize - 1])
    }
}

pub(crate) fn random_matrix<R: Rng>(rng: &mut R, r: usize, cols: usize) -> CMat {
    CMat::from_fn(r, cols, |_, _| c(gauss(rng), gauss(rng)) * cr(std::f64::consts::FRAC_1_SQRT_2))
}

pub(crate) fn random_vector<R: Rng>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| c(gauss(rng), gauss(rng)) * cr(std::f64::consts::FRAC_1_SQRT_2))
}

pub(crate) fn gauss<R: Rng>(rng: &mut R) -> f64 {
    // Box–Muller
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Row vector `C` (stored by its entries) times a matrix.
fn row_mul(cvec: &CVec, m: &CMat) -> CVec {
    m.transpose() * cvec
}

fn row_dot(cvec: &CVec, v: &CVec) -> Complex64 {
    cvec.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

/// Fornasini–Marchesini realization `(A, B, C, D)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FMRealization {
    a: Vec<CMat>,
    b: Vec<CVec>,
    c: CVec,
    d0: Complex64,
}

impl FMRealization {
    pub fn new(a: Vec<CMat>, b: Vec<CVec>, c: CVec, d0: Complex64) -> Result<Self> {
        let d = a.len();
        if d == 0 || b.len() != d {
            return Err(NcError::DimensionMismatch(format!(
                "need d >= 1 matrices and as many columns (got {} and {})",
                d,
                b.len()
            )));
        }
        let n = c.len();
        if a.iter().any(|m| m.nrows() != n || m.ncols() != n) || b.iter().any(|v| v.len() != n) {
            return Err(NcError::DimensionMismatch(format!("blocks inconsistent with n = {n}")));
        }
        Ok(FMRealization { a, b, c, d0 })
    }

    pub fn constant(d: usize, value: Complex64) -> Self {
        FMRealization {
            a: vec![CMat::zeros(0, 0); d],
            b: vec![CVec::zeros(0); d],
            c: CVec::zeros(0),
            d0: value,
        }
    }

    /// The coordinate function `z_j` (letters `1..=d`).
    pub fn variable(d: usize, j: usize) -> Self {
        let b = (1..=d).map(|k| CVec::from_element(1, if k == j { ONE } else { ZERO })).collect();
        FMRealization { a: vec![CMat::zeros(1, 1); d], b, c: CVec::from_element(1, ONE), d0: ZERO }
    }

    /// Polynomial with the given coefficients, realized on the prefix tree.
    pub fn polynomial(d: usize, terms: &[(Word, Complex64)]) -> Result<Self> {
        let mut r = FMRealization::constant(d, ZERO);
        for (w, coef) in terms {
            w.check(d)?;
            let mut t = FMRealization::constant(d, *coef);
            for &l in w.letters() {
                t = t.mul(&FMRealization::variable(d, l as usize))?;
            }
            r = r.add(&t)?;
        }
        Ok(r.minimize(RANK_TOL))
    }

    /// Random realization whose CP map has spectral radius `rho`.
    pub fn random<R: Rng>(rng: &mut R, d: usize, n: usize, rho: f64) -> Self {
        let mut a: Vec<CMat> = (0..d).map(|_| random_matrix(rng, n, n)).collect();
        if n > 0 {
            let cp = cp_radius(&a);
            if cp > 0.0 {
                let k = (rho / cp).sqrt();
                a.iter_mut().for_each(|m| *m *= cr(k));
            }
        }
        let b = (0..d).map(|_| random_vector(rng, n)).collect();
        let cc = random_vector(rng, n);
        let d0 = c(gauss(rng), gauss(rng));
        FMRealization { a, b, c: cc, d0 }
    }

    pub fn d(&self) -> usize {
        self.a.len()
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn a(&self) -> &[CMat] {
        &self.a
    }

    pub fn b(&self) -> &[CVec] {
        &self.b
    }

    /// Entries of the row `C`.
    pub fn c(&self) -> &CVec {
        &self.c
    }

    /// The value `D` at the origin.
    pub fn d0(&self) -> Complex64 {
        self.d0
    }

    /// `B = [B_1 ⋯ B_d]` as an `n × d` matrix.
    pub fn b_matrix(&self) -> CMat {
        let n = self.n();
        let mut m = CMat::zeros(n, self.d());
        for (j, bj) in self.b.iter().enumerate() {
            m.set_column(j, bj);
        }
        m
    }

    pub fn eval(&self, z: &MatrixTuple) -> Result<CMat> {
        if z.d() != self.d() {
            return Err(NcError::DimensionMismatch("tuple has a different alphabet size".into()));
        }
        let m = z.n();
        let n = self.n();
        let mut out = CMat::identity(m, m) * self.d0;
        if n == 0 {
            return Ok(out);
        }
        let mut pencil = CMat::identity(n * m, n * m);
        let mut bz = CMat::zeros(n * m, m);
        for j in 0..self.d() {
            pencil -= linalg::kron(&self.a[j], z.get(j));
            bz += linalg::kron(&linalg::col(&self.b[j]), z.get(j));
        }
        let cond = linalg::condition(&pencil);
        if !(cond < PENCIL_COND_CAP) {
            return Err(NcError::SingularPencil { cond });
        }
        let x = linalg::solve(&pencil, &bz)?;
        let crow = CMat::from_row_slice(1, n, self.c.as_slice());
        out += linalg::kron(&crow, &CMat::identity(m, m)) * x;
        Ok(out)
    }

    pub fn coeff(&self, w: &Word) -> Complex64 {
        let letters = w.letters();
        match letters.split_last() {
            None => self.d0,
            Some((&last, head)) => {
                let mut row = self.c.clone();
                for &l in head {
                    row = row_mul(&row, &self.a[l as usize - 1]);
                }
                row_dot(&row, &self.b[last as usize - 1])
            }
        }
    }

    /// Taylor coefficients of every word up to `order`.
    pub fn series(&self, order: usize) -> Result<FreeSeries> {
        let d = self.d();
        let mut s = FreeSeries::zeros(d, order)?;
        let mut dense = s.dense().to_vec();
        dense[0] = self.d0;
        // rows[i] = C A^w for the i-th word w of the current level
        let mut rows: Vec<CVec> = vec![self.c.clone()];
        for k in 0..order {
            let next_off = level_offset(d, k + 1);
            let mut next_rows = Vec::with_capacity(if k + 1 < order { rows.len() * d } else { 0 });
            for (i, row) in rows.iter().enumerate() {
                for j in 0..d {
                    dense[next_off + i * d + j] = row_dot(row, &self.b[j]);
                    if k + 1 < order {
                        next_rows.push(row_mul(row, &self.a[j]));
                    }
                }
            }
            rows = next_rows;
        }
        s = FreeSeries::from_dense(d, order, dense)?;
        Ok(s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_alphabet(other)?;
        let (n1, n2) = (self.n(), other.n());
        let a = (0..self.d())
            .map(|j| {
                let mut m = CMat::zeros(n1 + n2, n1 + n2);
                m.view_mut((0, 0), (n1, n1)).copy_from(&self.a[j]);
                m.view_mut((n1, n1), (n2, n2)).copy_from(&other.a[j]);
                m
            })
            .collect();
        let b = (0..self.d()).map(|j| stack(&self.b[j], &other.b[j])).collect();
        let cc = stack(&self.c, &other.c);
        Ok(FMRealization { a, b, c: cc, d0: self.d0 + other.d0 })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(cr(-1.0)))
    }

    /// Product `self · other` with `(rs)_w = Σ_{uv=w} r_u s_v`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_alphabet(other)?;
        let (n1, n2) = (self.n(), other.n());
        let a = (0..self.d())
            .map(|j| {
                let mut m = CMat::zeros(n1 + n2, n1 + n2);
                m.view_mut((0, 0), (n1, n1)).copy_from(&self.a[j]);
                let coupling = linalg::col(&self.b[j]) * CMat::from_row_slice(1, n2, other.c.as_slice());
                m.view_mut((0, n1), (n1, n2)).copy_from(&coupling);
                m.view_mut((n1, n1), (n2, n2)).copy_from(&other.a[j]);
                m
            })
            .collect();
        let b = (0..self.d()).map(|j| stack(&(&self.b[j] * other.d0), &other.b[j])).collect();
        let cc = stack(&self.c, &(&other.c * self.d0));
        Ok(FMRealization { a, b, c: cc, d0: self.d0 * other.d0 })
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        FMRealization { c: &self.c * lambda, d0: self.d0 * lambda, ..self.clone() }
    }

    /// Flip realization of the reciprocal.
    pub fn invert(&self, tol: f64) -> Result<Self> {
        if self.d0.norm() <= tol {
            return Err(NcError::SingularAtZero { detail: format!("|D| = {:.3e}", self.d0.norm()) });
        }
        let dinv = ONE / self.d0;
        let crow = CMat::from_row_slice(1, self.n(), self.c.as_slice());
        let a = (0..self.d())
            .map(|j| &self.a[j] - linalg::col(&self.b[j]) * &crow * dinv)
            .collect();
        let b = self.b.iter().map(|v| v * dinv).collect();
        Ok(FMRealization { a, b, c: &self.c * (-dinv), d0: dinv })
    }

    /// State similarity `(S⁻¹AS, S⁻¹B, CS)`.
    pub fn similarity(&self, s: &CMat) -> Result<Self> {
        let si = linalg::inverse(s)?;
        Ok(FMRealization {
            a: self.a.iter().map(|m| &si * m * s).collect(),
            b: self.b.iter().map(|v| &si * v).collect(),
            c: row_mul(&self.c, s),
            d0: self.d0,
        })
    }

    /// Restrict to the reachable subspace, then to the observable quotient.
    pub fn minimize(&self, tol: f64) -> Self {
        if self.n() == 0 {
            return self.clone();
        }
        let q = invariant_span(&self.a, &self.b_matrix(), tol);
        let ar: Vec<CMat> = self.a.iter().map(|m| q.adjoint() * m * &q).collect();
        let br: Vec<CVec> = self.b.iter().map(|v| q.adjoint() * v).collect();
        let cr_ = row_mul(&self.c, &q);
        let ars: Vec<CMat> = ar.iter().map(|m| m.adjoint()).collect();
        let cstar = linalg::col(&cr_.map(|x| x.conj()));
        let p = invariant_span(&ars, &cstar, tol);
        FMRealization {
            a: ar.iter().map(|m| p.adjoint() * m * &p).collect(),
            b: br.iter().map(|v| p.adjoint() * v).collect(),
            c: row_mul(&cr_, &p),
            d0: self.d0,
        }
    }

    /// Realization of `rᵗ` (reversed words).
    pub fn transpose(&self) -> Self {
        fm_from_descriptor(&transpose(&descriptor_from_fm(self)))
    }

    /// Realization of the coefficient-wise conjugate series.
    pub fn conj_coeffs(&self) -> Self {
        FMRealization {
            a: self.a.iter().map(|m| m.map(|x| x.conj())).collect(),
            b: self.b.iter().map(|v| v.map(|x| x.conj())).collect(),
            c: self.c.map(|x| x.conj()),
            d0: self.d0.conj(),
        }
    }

    /// Observability Gramian `W` with `W − Σ A_j* W A_j = C*C`.
    pub fn observability_gramian(&self) -> Result<CMat> {
        let ast: Vec<CMat> = self.a.iter().map(|m| m.adjoint()).collect();
        let cs = linalg::col(&self.c.map(|x| x.conj()));
        let p = &cs * cs.adjoint();
        linalg::stein_solve_raw(&ast, &ast, &p)
    }

    /// Fock-space norm `Σ_w |r_w|²`, finite when the state tuple is pure.
    pub fn h2_norm_sq(&self) -> Result<f64> {
        if self.n() == 0 {
            return Ok(self.d0.norm_sqr());
        }
        let w = self.observability_gramian()?;
        let tail: f64 = self.b.iter().map(|v| (v.adjoint() * &w * v)[(0, 0)].re).sum();
        Ok(self.d0.norm_sqr() + tail)
    }

    fn check_alphabet(&self, other: &Self) -> Result<()> {
        if self.d() != other.d() {
            return Err(NcError::DimensionMismatch(format!(
                "alphabet sizes {} and {} differ",
                self.d(),
                other.d()
            )));
        }
        Ok(())
    }
}

fn stack(x: &CVec, y: &CVec) -> CVec {
    CVec::from_iterator(x.len() + y.len(), x.iter().chain(y.iter()).copied())
}

/// Orthonormal basis of the smallest `A`-invariant subspace containing the
/// columns of `start`, grown breadth-first over letters.
pub fn invariant_span(a: &[CMat], start: &CMat, tol: f64) -> CMat {
    let n = start.nrows();
    let mut q = linalg::orth(start, tol);
    loop {
        if q.ncols() == 0 || q.ncols() == n {
            return q;
        }
        let mut blocks = vec![q.clone()];
        blocks.extend(a.iter().map(|m| m * &q));
        let next = linalg::orth(&linalg::hstack(&blocks, n), tol);
        if next.ncols() <= q.ncols() {
            return q;
        }
        q = next;
    }
}

/// Descriptor realization `(A, b, c)` with coefficients `b* A^ω c`.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorRealization {
    a: Vec<CMat>,
    b: CVec,
    c: CVec,
}

impl DescriptorRealization {
    pub fn new(a: Vec<CMat>, b: CVec, c: CVec) -> Result<Self> {
        let m = b.len();
        if a.is_empty() || c.len() != m || a.iter().any(|x| x.nrows() != m || x.ncols() != m) {
            return Err(NcError::DimensionMismatch(format!("descriptor blocks inconsistent with m = {m}")));
        }
        Ok(DescriptorRealization { a, b, c })
    }

    pub fn d(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &[CMat] {
        &self.a
    }

    pub fn b(&self) -> &CVec {
        &self.b
    }

    pub fn c(&self) -> &CVec {
        &self.c
    }

    pub fn coeff(&self, w: &Word) -> Complex64 {
        let mut v = self.c.clone();
        for &l in w.letters().iter().rev() {
            v = &self.a[l as usize - 1] * v;
        }
        self.b.dotc(&v)
    }

    pub fn series(&self, order: usize) -> Result<FreeSeries> {
        FreeSeries::from_fn(self.d(), order, |w| self.coeff(w))
    }

    pub fn eval(&self, z: &MatrixTuple) -> Result<CMat> {
        let (m, k) = (self.m(), z.n());
        let mut pencil = CMat::identity(m * k, m * k);
        for j in 0..self.d() {
            pencil -= linalg::kron(&self.a[j], z.get(j));
        }
        let cond = linalg::condition(&pencil);
        if !(cond < PENCIL_COND_CAP) {
            return Err(NcError::SingularPencil { cond });
        }
        let id = CMat::identity(k, k);
        let rhs = linalg::kron(&linalg::col(&self.c), &id);
        let x = linalg::solve(&pencil, &rhs)?;
        Ok(linalg::kron(&linalg::col(&self.b).adjoint(), &id) * x)
    }
}

/// `(A, b, c) ↦ (Aᵀ, c̄, b̄)`, realizing the transposed function.
pub fn transpose(desc: &DescriptorRealization) -> DescriptorRealization {
    DescriptorRealization {
        a: desc.a.iter().map(|m| m.transpose()).collect(),
        b: desc.c.map(|x| x.conj()),
        c: desc.b.map(|x| x.conj()),
    }
}

/// Descriptor of size `n+1`: `A_j ↦ [[A_j, B_j], [0, 0]]`, `c = e_{n+1}`, `b* = [C, D]`.
pub fn descriptor_from_fm(r: &FMRealization) -> DescriptorRealization {
    let n = r.n();
    let a = (0..r.d())
        .map(|j| {
            let mut m = CMat::zeros(n + 1, n + 1);
            m.view_mut((0, 0), (n, n)).copy_from(&r.a[j]);
            m.view_mut((0, n), (n, 1)).copy_from(&r.b[j]);
            m
        })
        .collect();
    let mut b = CVec::zeros(n + 1);
    for i in 0..n {
        b[i] = r.c[i].conj();
    }
    b[n] = r.d0.conj();
    let mut cc = CVec::zeros(n + 1);
    cc[n] = ONE;
    DescriptorRealization { a, b, c: cc }
}

/// Restriction to `M₀ = span{A^ω c : ω ≠ ∅}`.
pub fn fm_from_descriptor(desc: &DescriptorRealization) -> FMRealization {
    let m = desc.m();
    let mut start = CMat::zeros(m, desc.d());
    for (j, aj) in desc.a.iter().enumerate() {
        start.set_column(j, &(aj * &desc.c));
    }
    let q = invariant_span(&desc.a, &start, RANK_TOL);
    let qa = q.adjoint();
    FMRealization {
        a: desc.a.iter().map(|x| &qa * x * &q).collect(),
        b: desc.a.iter().map(|x| &qa * (x * &desc.c)).collect(),
        c: (desc.b.adjoint() * &q).transpose(),
        d0: desc.b.dotc(&desc.c),
    }
}

/// Result of [`purity`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Purity {
    pub is_pure: bool,
    pub cp_radius: f64,
}

/// Spectral radius of the CP map `X ↦ Σ A_j X A_j*`.
pub fn cp_radius(a: &[CMat]) -> f64 {
    let n = a.first().map(|m| m.nrows()).unwrap_or(0);
    if n == 0 {
        return 0.0;
    }
    if n * n <= linalg::STEIN_DIRECT_MAX {
        let mut m = CMat::zeros(n * n, n * n);
        for aj in a {
            m += linalg::kron(&aj.map(|x| x.conj()), aj);
        }
        return linalg::spectral_radius(&m);
    }
    // Power iteration on positive matrices from the identity.
    let mut x = CMat::identity(n, n);
    let mut log_growth = 0.0;
    let steps = 400;
    for k in 0..steps {
        let y = linalg::stein_map(a, &x, a);
        let t = y.trace().re;
        if t <= 0.0 {
            return 0.0;
        }
        if k >= steps / 2 {
            log_growth += (t / x.trace().re).ln();
        }
        x = y * cr(1.0 / t);
    }
    (log_growth / (steps - steps / 2) as f64).exp()
}

pub fn purity(a: &[CMat], tol: f64) -> Result<Purity> {
    let rho = cp_radius(a);
    if (rho - 1.0).abs() <= tol {
        return Err(NcError::Indeterminate(format!("cp radius {rho} within {tol} of 1")));
    }
    Ok(Purity { is_pure: rho < 1.0 - tol, cp_radius: rho })
}

/// Similarity to a strict row contraction.
#[derive(Clone, Debug)]
pub struct Rescaled {
    /// `A′_j = S⁻¹ A_j S`.
    pub s: CMat,
    pub s_inv: CMat,
    pub tuple: Vec<CMat>,
    /// `1 − ‖Σ A′_j A′_j*‖`.
    pub margin: f64,
}

pub fn rescale_to_strict(a: &[CMat]) -> Result<Rescaled> {
    let n = a.first().map(|m| m.nrows()).unwrap_or(0);
    if n == 0 {
        return Ok(Rescaled {
            s: CMat::zeros(0, 0),
            s_inv: CMat::zeros(0, 0),
            tuple: a.to_vec(),
            margin: 1.0,
        });
    }
    let id = CMat::identity(n, n);
    let h = linalg::stein_solve_raw(a, a, &id).map_err(|e| NcError::NotPure(e.to_string()))?;
    let h = linalg::hermitian_part(&h);
    let lmin = linalg::lambda_min(&h);
    if !(lmin > 0.0) || !h.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        return Err(NcError::NotPure("Stein solution is not positive definite".into()));
    }
    let s = linalg::hermitian_fn(&h, f64::sqrt);
    let s_inv = linalg::hermitian_fn(&h, |x| 1.0 / x.sqrt());
    let tuple: Vec<CMat> = a.iter().map(|m| &s_inv * m * &s).collect();
    let gram = tuple.iter().fold(CMat::zeros(n, n), |acc, m| acc + m * m.adjoint());
    let margin = 1.0 - linalg::lambda_max(&gram);
    if !(margin > 0.0) {
        return Err(NcError::NotPure(format!("rescaled tuple has margin {margin:.3e}")));
    }
    Ok(Rescaled { s, s_inv, tuple, margin })
}

/// `(1 + b)(1 − b)⁻¹`, minimized.
pub fn cayley(b: &FMRealization) -> Result<FMRealization> {
    let d = b.d();
    let one = FMRealization::constant(d, ONE);
    let num = one.add(b)?;
    let den = one.sub(b)?.invert(1e-12).map_err(|_| NcError::SingularAtZero {
        detail: format!("1 - b(0) = {}", ONE - b.d0()),
    })?;
    Ok(num.mul(&den)?.minimize(RANK_TOL))
}

/// `(h − 1)(h + 1)⁻¹`, minimized.
pub fn cayley_inverse(h: &FMRealization) -> Result<FMRealization> {
    let d = h.d();
    let one = FMRealization::constant(d, ONE);
    let num = h.sub(&one)?;
    let den = h.add(&one)?.invert(1e-12).map_err(|_| NcError::SingularAtZero {
        detail: format!("h(0) + 1 = {}", h.d0() + ONE),
    })?;
    Ok(num.mul(&den)?.minimize(RANK_TOL))
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct FmJson {
    d: usize,
    n: usize,
    A: Vec<Vec<Vec<[f64; 2]>>>,
    B: Vec<Vec<[f64; 2]>>,
    C: Vec<[f64; 2]>,
    D: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct DescJson {
    d: usize,
    m: usize,
    A: Vec<Vec<Vec<[f64; 2]>>>,
    b: Vec<[f64; 2]>,
    c: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct TupleJson {
    d: usize,
    n: usize,
    Z: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bound: Option<f64>,
}

pub(crate) fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub(crate) fn unpair(p: [f64; 2]) -> Complex64 {
    c(p[0], p[1])
}

pub(crate) fn mat_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| pair(m[(i, j)])).collect()).collect()
}

pub(crate) fn rows_to_mat(rows: &[Vec<[f64; 2]>], n: usize) -> Result<CMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(NcError::DimensionMismatch(format!("expected {n}x{n} matrix")));
    }
    Ok(CMat::from_fn(n, n, |i, j| unpair(rows[i][j])))
}

pub(crate) fn vec_to_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|&z| pair(z)).collect()
}

pub(crate) fn pairs_to_vec(p: &[[f64; 2]], n: usize) -> Result<CVec> {
    if p.len() != n {
        return Err(NcError::DimensionMismatch(format!("expected vector of length {n}")));
    }
    Ok(DVector::from_iterator(n, p.iter().map(|&x| unpair(x))))
}

impl FMRealization {
    pub fn to_json(&self) -> serde_json::Value {
        let js = FmJson {
            d: self.d(),
            n: self.n(),
            A: self.a.iter().map(mat_to_rows).collect(),
            B: self.b.iter().map(vec_to_pairs).collect(),
            C: vec_to_pairs(&self.c),
            D: pair(self.d0),
        };
        serde_json::to_value(js).expect("realization serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let js: FmJson =
            serde_json::from_value(v.clone()).map_err(|e| NcError::InvalidInput(e.to_string()))?;
        if js.A.len() != js.d || js.B.len() != js.d {
            return Err(NcError::DimensionMismatch("A and B must have d entries".into()));
        }
        let a = js.A.iter().map(|m| rows_to_mat(m, js.n)).collect::<Result<Vec<_>>>()?;
        let b = js.B.iter().map(|v| pairs_to_vec(v, js.n)).collect::<Result<Vec<_>>>()?;
        FMRealization::new(a, b, pairs_to_vec(&js.C, js.n)?, unpair(js.D))
    }
}

impl MatrixTuple {
    pub fn to_json(&self) -> serde_json::Value {
        let js = TupleJson { d: self.d(), n: self.n(), Z: self.z.iter().map(mat_to_rows).collect(), bound: self.bound };
        serde_json::to_value(js).expect("tuple serializes")
    }

    /// Reads `{d, n, Z}`; a `bound` field is not trusted and is dropped.
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let js: TupleJson =
            serde_json::from_value(v.clone()).map_err(|e| NcError::InvalidInput(e.to_string()))?;
        if js.Z.len() != js.d {
            return Err(NcError::DimensionMismatch("Z must have d entries".into()));
        }
        let z = js.Z.iter().map(|m| rows_to_mat(m, js.n)).collect::<Result<Vec<_>>>()?;
        MatrixTuple::new(z)
    }
}

impl DescriptorRealization {
    pub fn to_json(&self) -> serde_json::Value {
        let js = DescJson {
            d: self.d(),
            m: self.m(),
            A: self.a.iter().map(mat_to_rows).collect(),
            b: vec_to_pairs(&self.b),
            c: vec_to_pairs(&self.c),
        };
        serde_json::to_value(js).expect("descriptor serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let js: DescJson =
            serde_json::from_value(v.clone()).map_err(|e| NcError::InvalidInput(e.to_string()))?;
        let a = js.A.iter().map(|m| rows_to_mat(m, js.m)).collect::<Result<Vec<_>>>()?;
        DescriptorRealization::new(a, pairs_to_vec(&js.b, js.m)?, pairs_to_vec(&js.c, js.m)?)
    }
}

impl Serialize for FMRealization {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FMRealization {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        FMRealization::from_json(&v).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_coefficients() {
        let z1 = FMRealization::variable(2, 1);
        assert_eq!(z1.coeff(&Word::new(vec![1])), ONE);
        assert_eq!(z1.coeff(&Word::new(vec![2])), ZERO);
    }
}
