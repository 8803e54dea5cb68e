//! Truncated Fock space: shift matrices, multiplier compressions, left Toeplitz
//! matrices built from symbols, positivity and entropy checks.
//!
//! Basis vectors `e_ω` are indexed by words `|ω| <= N` in degree-lex order.
//! `L_k e_ω = e_{kω}`, `R_k e_ω = e_{ωk}`; words pushed past length `N` are dropped.
//!
//! A left Toeplitz operator `T` is stored through its symbol `t_δ = ⟨1, T e_δ⟩`,
//! so that `T[α, αδ] = t_δ` and `T[αδ, α] = conj(t_δ)`.

use num_complex::Complex64;
use serde_json::json;

use crate::error::{NcError, Result};
use crate::freecore::{level_offset, num_words, word_at, FreeSeries, Word};
use crate::linalg::{self, cr, CMat, CVec, ZERO};
use crate::realize::{cp_radius, mat_to_rows, FMRealization};

/// Largest number of matrix entries a truncation may allocate.
pub const ENTRY_CAP: usize = 10_000_000;

/// Largest coefficient order, in words, used for truncated symbols.
pub const SYMBOL_WORD_BUDGET: usize = 1 << 21;

/// Relative size below which a Cholesky pivot counts as zero.
const PIVOT_TOL: f64 = 1e-12;
/// Relative negativity tolerated before declaring a form indefinite.
const NEG_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-12;
/// Relative size of an entry linking a null pivot to the rest of the form.
const COUPLING_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Dimension of the space spanned by words of length `<= n`, subject to [`ENTRY_CAP`].
pub fn truncated_dim(d: usize, n: usize) -> Result<usize> {
    let dim = num_words(d, n).ok_or(NcError::CapExceeded { entries: usize::MAX })?;
    let entries = dim.checked_mul(dim).ok_or(NcError::CapExceeded { entries: usize::MAX })?;
    if entries > ENTRY_CAP {
        return Err(NcError::CapExceeded { entries });
    }
    Ok(dim)
}

/// Index of `uv` given the lengths and in-level positions of `u` and `v`.
#[inline]
fn concat_index(d: usize, u_len: usize, u_loc: usize, v_len: usize, v_loc: usize) -> usize {
    level_offset(d, u_len + v_len) + u_loc * d.pow(v_len as u32) + v_loc
}

/// `(length, in-level position)` of every index below `dim`.
fn layout(d: usize, n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut size = 1usize;
    for k in 0..=n {
        out.extend((0..size).map(|loc| (k, loc)));
        size *= d;
    }
    out
}

fn local_index(w: &Word, d: usize) -> usize {
    w.letters().iter().fold(0, |acc, &l| acc * d + (l as usize - 1))
}

/// Square matrix on the truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedOperator {
    d: usize,
    n: usize,
    m: CMat,
}

impl TruncatedOperator {
    pub fn new(d: usize, n: usize, m: CMat) -> Result<Self> {
        let dim = truncated_dim(d, n)?;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(NcError::DimensionMismatch(format!(
                "operator on words of length <= {n} over {d} letters must be {dim}x{dim}"
            )));
        }
        Ok(TruncatedOperator { d, n, m })
    }

    pub fn identity(d: usize, n: usize) -> Result<Self> {
        let dim = truncated_dim(d, n)?;
        Ok(TruncatedOperator { d, n, m: CMat::identity(dim, dim) })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Truncation length `N`.
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Words labelling rows and columns.
    pub fn index(&self) -> Vec<Word> {
        (0..self.dim()).map(|i| word_at(i, self.d)).collect()
    }

    pub fn adjoint(&self) -> Self {
        TruncatedOperator { d: self.d, n: self.n, m: self.m.adjoint() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.d != other.d || self.n != other.n {
            return Err(NcError::DimensionMismatch("truncations differ".into()));
        }
        Ok(TruncatedOperator { d: self.d, n: self.n, m: &self.m * &other.m })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.d != other.d || self.n != other.n {
            return Err(NcError::DimensionMismatch("truncations differ".into()));
        }
        Ok(TruncatedOperator { d: self.d, n: self.n, m: &self.m - &other.m })
    }

    /// Compression to words of length `<= k` (a leading principal block).
    pub fn block(&self, k: usize) -> CMat {
        let k = k.min(self.n);
        let dim = num_words(self.d, k).unwrap();
        self.m.view((0, 0), (dim, dim)).into_owned()
    }

    pub fn hermitian_defect(&self) -> f64 {
        linalg::max_abs(&(&self.m - self.m.adjoint()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let words: Vec<Vec<u8>> = self.index().iter().map(|w| w.letters().to_vec()).collect();
        json!({"d": self.d, "N": self.n, "words": words, "M": mat_to_rows(&self.m)})
    }
}

/// Left and right shift compressions.
#[derive(Clone, Debug)]
pub struct Shifts {
    pub l: Vec<CMat>,
    pub r: Vec<CMat>,
}

pub fn shifts(d: usize, n: usize) -> Result<Shifts> {
    if d == 0 {
        return Err(NcError::InvalidInput("alphabet size must be positive".into()));
    }
    let dim = truncated_dim(d, n)?;
    let lay = layout(d, n);
    let mut l = vec![CMat::zeros(dim, dim); d];
    let mut r = vec![CMat::zeros(dim, dim); d];
    for (col, &(len, loc)) in lay.iter().enumerate() {
        if len == n {
            continue;
        }
        for k in 0..d {
            l[k][(concat_index(d, 1, k, len, loc), col)] = cr(1.0);
            r[k][(concat_index(d, len, loc, 1, k), col)] = cr(1.0);
        }
    }
    Ok(Shifts { l, r })
}

/// Compression of `f(L)` (left) or `f(R)` (right) to words of length `<= n`.
///
/// `f(L) e_β = Σ f_ω e_{ωβ}` and `f(R) e_β = Σ f_ω e_{βωᵗ}`.
pub fn mult_matrix(f: &FreeSeries, n: usize, side: Side) -> Result<TruncatedOperator> {
    if f.order() < n {
        return Err(NcError::OrderExceeded { requested: n, available: f.order() });
    }
    let d = f.d();
    let dim = truncated_dim(d, n)?;
    let lay = layout(d, n);
    let mut m = CMat::zeros(dim, dim);
    for (col, &(blen, bloc)) in lay.iter().enumerate() {
        for (i, &(wlen, wloc)) in lay.iter().enumerate() {
            if wlen + blen > n {
                break;
            }
            let c = f.at(i);
            if c == ZERO {
                continue;
            }
            let row = match side {
                Side::Left => concat_index(d, wlen, wloc, blen, bloc),
                Side::Right => {
                    let rev = local_index(&word_at(i, d).reverse(), d);
                    concat_index(d, blen, bloc, wlen, rev)
                }
            };
            m[(row, col)] = c;
        }
    }
    Ok(TruncatedOperator { d, n, m })
}

/// `max_{j,k} ‖L_j* T L_k − δ_{jk} T‖` on words of length `<= N−1`, in Frobenius norm.
pub fn toeplitz_residual(t: &TruncatedOperator) -> f64 {
    if t.n == 0 {
        return 0.0;
    }
    let d = t.d;
    let lay = layout(d, t.n - 1);
    let mut worst = 0.0f64;
    for j in 0..d {
        for k in 0..d {
            let mut acc = 0.0;
            for (a, &(alen, aloc)) in lay.iter().enumerate() {
                let ja = concat_index(d, 1, j, alen, aloc);
                for (b, &(blen, bloc)) in lay.iter().enumerate() {
                    let kb = concat_index(d, 1, k, blen, bloc);
                    let mut e = t.m[(ja, kb)];
                    if j == k {
                        e -= t.m[(a, b)];
                    }
                    acc += e.norm_sqr();
                }
            }
            worst = worst.max(acc.sqrt());
        }
    }
    worst
}

/// Smallest eigenvalue of a Hermitian truncation.
pub fn min_eig(t: &TruncatedOperator) -> Result<f64> {
    let defect = t.hermitian_defect();
    if defect > HERMITIAN_TOL * linalg::max_abs(&t.m).max(1.0) {
        return Err(NcError::NotHermitian { defect });
    }
    Ok(linalg::lambda_min(&t.m))
}

/// Certifies `min_eig(t) >= −tol` by a Cholesky factorization of `T + tol·I`.
pub fn min_eig_at_least(t: &TruncatedOperator, tol: f64) -> Result<bool> {
    let defect = t.hermitian_defect();
    if defect > HERMITIAN_TOL * linalg::max_abs(&t.m).max(1.0) {
        return Err(NcError::NotHermitian { defect });
    }
    let dim = t.dim();
    let shifted = linalg::hermitian_part(&t.m) + CMat::identity(dim, dim) * cr(tol);
    Ok(positive_definite(&shifted))
}

/// Cholesky factorization succeeding with strictly positive real pivots.
fn positive_definite(a: &CMat) -> bool {
    let n = a.nrows();
    let mut l = vec![ZERO; n * n];
    for k in 0..n {
        let (head, tail) = l.split_at_mut(k * n);
        let row_k = &mut tail[..n];
        for j in 0..k {
            let row_j = &head[j * n..j * n + j + 1];
            let s: Complex64 = row_k[..j].iter().zip(row_j).map(|(x, y)| x * y.conj()).sum();
            row_k[j] = (a[(k, j)] - s) / row_j[j].re;
        }
        let p = a[(k, k)].re - row_k[..k].iter().map(|x| x.norm_sqr()).sum::<f64>();
        if !(p > 0.0) {
            return false;
        }
        row_k[k] = cr(p.sqrt());
    }
    true
}

/// Left Toeplitz matrix on words of length `<= n` with symbol `t`.
pub fn toeplitz_from_symbol(t: &FreeSeries, n: usize) -> Result<TruncatedOperator> {
    if t.order() < n {
        return Err(NcError::OrderExceeded { requested: n, available: t.order() });
    }
    let d = t.d();
    let dim = truncated_dim(d, n)?;
    let lay = layout(d, n);
    let mut m = CMat::zeros(dim, dim);
    for (a, &(alen, aloc)) in lay.iter().enumerate() {
        for (i, &(dlen, dloc)) in lay.iter().enumerate() {
            if alen + dlen > n {
                break;
            }
            let ad = concat_index(d, alen, aloc, dlen, dloc);
            let v = t.at(i);
            if i == 0 {
                m[(a, a)] = cr(v.re);
            } else {
                m[(a, ad)] = v;
                m[(ad, a)] = v.conj();
            }
        }
    }
    Ok(TruncatedOperator { d, n, m })
}

/// Truncated symbol together with a bound on the neglected part of every entry.
#[derive(Clone, Debug)]
pub struct Symbol {
    pub t: FreeSeries,
    pub tail: f64,
}

/// Symbol of `f(R)* f(R)` up to length `n`: `t_δ = Σ_u conj(f_{uδᵗ}) f_u`.
///
/// The sums run over `|u| <= order(f) − |δ|`; `total_energy` is `‖f‖²` and
/// bounds the remainder by Cauchy–Schwarz, `√(E_{>m−n} E_{>m})` with `E_{>k}`
/// the energy beyond length `k`.
pub fn gram_symbol(f: &FreeSeries, n: usize, total_energy: f64) -> Result<Symbol> {
    let d = f.d();
    let m = f.order();
    if m < n {
        return Err(NcError::OrderExceeded { requested: n, available: m });
    }
    let mut t = FreeSeries::zeros(d, n)?;
    let lay = layout(d, n);
    for (i, &(dlen, _)) in lay.iter().enumerate() {
        let drev = local_index(&word_at(i, d).reverse(), d);
        let mut acc = ZERO;
        let mut size = 1usize;
        for ulen in 0..=(m - dlen) {
            let base_u = level_offset(d, ulen);
            for uloc in 0..size {
                let fu = f.at(base_u + uloc);
                if fu != ZERO {
                    acc += f.at(concat_index(d, ulen, uloc, dlen, drev)).conj() * fu;
                }
            }
            size *= d;
        }
        t.set(&word_at(i, d), acc)?;
    }
    // the neglected part of t_δ pairs u with |u| > m − |δ| against uδᵗ with |uδᵗ| > m
    let floor = 16.0 * f64::EPSILON * total_energy;
    let kept: f64 = (0..=(m - n)).map(|k| f.level_energy(k)).sum();
    let all: f64 = kept + ((m - n + 1)..=m).map(|k| f.level_energy(k)).sum::<f64>();
    let outer = (total_energy - kept).max(0.0);
    let inner = (total_energy - all).max(floor);
    Ok(Symbol { t, tail: (outer * inner).sqrt().min(outer) })
}

/// Symbol of `I − b(R)* b(R)`.
pub fn defect_symbol(b: &FreeSeries, n: usize, total_energy: f64) -> Result<Symbol> {
    let mut s = gram_symbol(b, n, total_energy)?;
    s.t = FreeSeries::unit(b.d(), n)?.sub(&s.t)?;
    Ok(s)
}

/// Symbol of `Re h(R)`: `t_∅ = Re h_∅`, `t_δ = conj(h_{δᵗ})/2`.
pub fn herglotz_symbol(h: &FreeSeries, n: usize) -> Result<FreeSeries> {
    if h.order() < n {
        return Err(NcError::OrderExceeded { requested: n, available: h.order() });
    }
    let d = h.d();
    FreeSeries::from_fn(d, n, |w| {
        let v = h.get(&w.reverse()).unwrap();
        if w.is_empty() {
            cr(v.re)
        } else {
            v.conj() * 0.5
        }
    })
}

/// Truncated symbol of `f(R)* f(R)` for a rational `f`, with the coefficient
/// order chosen from the decay rate `cp_radius(A)` of the level energies so
/// that the tail is at most `tol` when the word budget allows it.
pub fn rational_gram_symbol(f: &FMRealization, n: usize, tol: f64) -> Result<Symbol> {
    let total = f.h2_norm_sq()?;
    let d = f.d();
    let rho = if f.n() == 0 { 0.0 } else { cp_radius(f.a()) };
    // a nilpotent tuple has no coefficients past length n
    let levels = if total <= tol {
        1
    } else if rho >= 1.0 {
        usize::MAX / 2
    } else if rho <= f64::MIN_POSITIVE {
        f.n() + 1
    } else {
        (((tol / total).ln() / rho.ln()).ceil().max(0.0) as usize + 4).max(f.n() + 1)
    };
    let mut m = n.saturating_add(levels);
    while m > n && num_words(d, m).is_none_or(|w| w > SYMBOL_WORD_BUDGET) {
        m -= 1;
    }
    gram_symbol(&f.series(m)?, n, total)
}

/// Exact symbol of `f(R)* f(R)` from a realization:
/// `t_∅ = ‖f‖²` and `t_δ = conj(f_{δᵗ}) D + Σ_l (A_l y_δ)* W B_l`, where
/// `y_δ = A_{j1} ⋯ A_{j(k−1)} B_{jk}` for `δᵗ = j1 ⋯ jk` and `W` is the
/// observability Gramian.
pub fn realization_symbol(f: &FMRealization, n: usize) -> Result<FreeSeries> {
    let d = f.d();
    if f.n() == 0 {
        return FreeSeries::from_pairs(d, n, &[(Word::empty(), cr(f.d0().norm_sqr()))]);
    }
    let w = f.observability_gramian()?;
    let wb: Vec<CVec> = f.b().iter().map(|b| &w * b).collect();
    let total = f.h2_norm_sq()?;
    FreeSeries::from_fn(d, n, |delta| {
        if delta.is_empty() {
            return cr(total);
        }
        let rev = delta.reverse();
        let l = rev.letters();
        let mut y = f.b()[l[l.len() - 1] as usize - 1].clone();
        for &j in l[..l.len() - 1].iter().rev() {
            y = &f.a()[j as usize - 1] * y;
        }
        let tail: Complex64 = (0..d).map(|k| (&f.a()[k] * &y).dotc(&wb[k])).sum();
        f.coeff(&rev).conj() * f.d0() + tail
    })
}

/// Order-`N` entropy value: the Schur complement of the `(∅,∅)` entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entropy {
    pub eps: f64,
    pub log_eps: f64,
}

/// Semi-definite Cholesky factor (row-major, lower), skipping zero pivots.
struct SemiChol {
    n: usize,
    coupling: f64,
    l: Vec<Complex64>,
    diag: Vec<f64>,
}

impl SemiChol {
    fn new(a: &CMat) -> Result<Self> {
        let n = a.nrows();
        let scale = (0..n).map(|i| a[(i, i)].re.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let coupling = COUPLING_TOL * scale;
        let mut l = vec![ZERO; n * n];
        let mut diag = vec![0.0; n];
        for k in 0..n {
            let (head, tail) = l.split_at_mut(k * n);
            let row_k = &mut tail[..n];
            for j in 0..k {
                let row_j = &head[j * n..j * n + j];
                let s: Complex64 = row_k[..j].iter().zip(row_j).map(|(x, y)| x * y.conj()).sum();
                let resid = a[(k, j)] - s;
                if diag[j] == 0.0 {
                    // a null direction coupled to anything makes the form indefinite
                    if resid.norm() > coupling {
                        return Err(NcError::NotPositive { min_eig: linalg::lambda_min(a) });
                    }
                    continue;
                }
                row_k[j] = resid / diag[j];
            }
            let p = a[(k, k)].re - row_k[..k].iter().map(|x| x.norm_sqr()).sum::<f64>();
            if p > PIVOT_TOL * scale {
                diag[k] = p.sqrt();
                row_k[k] = cr(diag[k]);
            } else if p < -NEG_TOL * scale {
                return Err(NcError::NotPositive { min_eig: linalg::lambda_min(a) });
            }
            // a null row keeps its projection coefficients for the coupling checks
        }
        Ok(SemiChol { n, coupling, l, diag })
    }

    /// `‖L⁺ c‖²` by forward substitution; `None` when `c` leaves the range.
    fn energy(&self, c: &[Complex64]) -> Option<f64> {
        let n = self.n;
        let mut x = vec![ZERO; n];
        let mut total = 0.0;
        for k in 0..n {
            let row = &self.l[k * n..k * n + k];
            let s: Complex64 = row.iter().zip(&x[..k]).map(|(a, b)| a * b).sum();
            if self.diag[k] == 0.0 {
                if (c[k] - s).norm() > self.coupling {
                    return None;
                }
                continue;
            }
            x[k] = (c[k] - s) / self.diag[k];
            total += x[k].norm_sqr();
        }
        Some(total)
    }
}

/// `ε_N = inf_{p(0)=0} ⟨1−p, T(1−p)⟩` over polynomials of degree `<= n`.
///
/// The words of length `1..=N` split into `d` blocks `{jα}`, each carrying a copy
/// of `T_{N−1}`, so one factorization of `T_{N−1}` serves all of them; `e_∅` is
/// eliminated last.
pub fn entropy_schur(t: &FreeSeries, n: usize) -> Result<Entropy> {
    if t.order() < n {
        return Err(NcError::OrderExceeded { requested: n, available: t.order() });
    }
    let d = t.d();
    truncated_dim(d, n)?;
    let t0 = t.at(0).re;
    if n == 0 {
        if t0 < -NEG_TOL {
            return Err(NcError::NotPositive { min_eig: t0 });
        }
        let eps = t0.max(0.0);
        return Ok(Entropy { eps, log_eps: eps.ln() });
    }
    let inner = toeplitz_from_symbol(t, n - 1)?;
    let chol = SemiChol::new(inner.matrix())?;
    let lay = layout(d, n - 1);
    let mut removed = 0.0;
    for j in 0..d {
        // c[α] = T[jα, ∅] = conj(t_{jα})
        let c: Vec<Complex64> = lay
            .iter()
            .map(|&(len, loc)| t.at(concat_index(d, 1, j, len, loc)).conj())
            .collect();
        removed += chol
            .energy(&c)
            .ok_or_else(|| NcError::NotPositive { min_eig: linalg::lambda_min(&toeplitz_from_symbol(t, n).unwrap().into_matrix()) })?;
    }
    let eps = t0 - removed;
    let scale = t0.abs().max(removed).max(f64::MIN_POSITIVE);
    if eps < -NEG_TOL * scale {
        return Err(NcError::NotPositive { min_eig: eps });
    }
    let eps = eps.max(0.0);
    Ok(Entropy { eps, log_eps: eps.ln() })
}

/// Classical outer factor of a nonnegative trigonometric symbol (`d = 1`):
/// last row of the Cholesky factor of the `(N+1)`-point Toeplitz matrix, reversed,
/// with positive constant term.
pub fn spectral_factor_1d(t: &FreeSeries, n: usize) -> Result<FreeSeries> {
    if t.d() != 1 {
        return Err(NcError::InvalidInput("spectral_factor_1d needs d = 1".into()));
    }
    let tm = toeplitz_from_symbol(t, n)?;
    let chol = SemiChol::new(tm.matrix())?;
    let row = &chol.l[n * (n + 1)..(n + 1) * (n + 1)];
    let mut coeffs: Vec<Complex64> = row.iter().rev().copied().collect();
    let lead = coeffs[0];
    if lead.norm() > 0.0 {
        let phase = lead.conj() / lead.norm();
        coeffs.iter_mut().for_each(|c| *c *= phase);
    }
    FreeSeries::from_dense(1, n, coeffs)
}
