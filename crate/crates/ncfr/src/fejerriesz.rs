//! Rational Fejér–Riesz factorization of `Re 𝔥(R)`, Herglotz squares,
//! Radon–Nikodym derivatives and Clark-measure moments.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NcError, Result};
use crate::focktrunc::{self, herglotz_symbol, rational_gram_symbol, realization_symbol, toeplitz_from_symbol, TruncatedOperator};
use crate::freecore::{num_words, word_at, word_index, FreeSeries, Word};
use crate::kernels::riccati_min;
use crate::linalg::{self, cr, CMat, CVec, ONE, ZERO};
use crate::realize::{cayley, cayley_inverse, cp_radius, FMRealization, MatrixTuple, RANK_TOL};
use crate::sarason::{self, classify, precheck_order, verify_column, ColumnReport, Verdict};

/// Eigenvalue slack of the positivity pre-check on `Re 𝔥(R)`.
pub const POSITIVITY_TOL: f64 = 1e-9;
/// Inversion threshold used when forming `(1 − 𝔟)⁻¹`.
const INVERT_TOL: f64 = 1e-12;

/// Moments `μ(L^ω)` of a positive NC measure on words of length `<= order`.
#[derive(Clone, Debug, PartialEq)]
pub struct NCMeasureMoments {
    pub moments: FreeSeries,
}

impl NCMeasureMoments {
    pub fn new(moments: FreeSeries) -> Self {
        NCMeasureMoments { moments }
    }

    pub fn d(&self) -> usize {
        self.moments.d()
    }

    pub fn order(&self) -> usize {
        self.moments.order()
    }

    pub fn get(&self, w: &Word) -> Result<Complex64> {
        self.moments.get(w)
    }

    /// Toeplitz symbol `t_ω = ⟨1, T e_ω⟩` in the library's inner product,
    /// which is conjugate-linear in the first slot: `t = conj(μ)`.
    pub fn symbol(&self) -> FreeSeries {
        self.moments.conj()
    }

    /// Moment matrix on words of length `<= n`.
    pub fn toeplitz(&self, n: usize) -> Result<TruncatedOperator> {
        toeplitz_from_symbol(&self.symbol(), n)
    }

    /// Smallest eigenvalue of the moment matrix on words of length `<= n`.
    pub fn min_eig(&self, n: usize) -> Result<f64> {
        focktrunc::min_eig(&self.toeplitz(n)?)
    }

    /// Entropy `ε_n` of the moment matrix.
    pub fn entropy(&self, n: usize) -> Result<f64> {
        Ok(focktrunc::entropy_schur(&self.symbol(), n)?.eps)
    }

    pub fn to_json(&self) -> serde_json::Value {
        self.moments.to_json(true)
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        Ok(NCMeasureMoments { moments: FreeSeries::from_json(v)? })
    }
}

/// `𝔥` with `r(R)*r(R) = Re 𝔥(R)`, realized on the state space of `r`:
/// `𝔥 = (A, B, 2C̃, ‖r‖²)` with `C̃ = conj(D) C + Σ_k B_k* W A_k` and `W` the
/// observability Gramian of `r`.
pub fn herglotz_square(r: &FMRealization) -> Result<FMRealization> {
    let r = r.minimize(RANK_TOL);
    let d = r.d();
    if r.n() == 0 {
        return Ok(FMRealization::constant(d, cr(r.d0().norm_sqr())));
    }
    let rho = cp_radius(r.a());
    if !(rho < 1.0) {
        return Err(NcError::NotPure(format!("cp radius {rho:.6}")));
    }
    let w = r.observability_gramian()?;
    let mut row = r.c().transpose() * r.d0().conj();
    let mut s0 = r.d0().norm_sqr();
    for (ak, bk) in r.a().iter().zip(r.b()) {
        let bw = bk.adjoint() * &w;
        row += &bw * ak;
        s0 += (&bw * bk)[(0, 0)].re;
    }
    let c = row.transpose() * cr(2.0);
    Ok(FMRealization::new(r.a().to_vec(), r.b().to_vec(), c, cr(s0))?.minimize(RANK_TOL))
}

/// Fails with `NotPositive` when the truncation of `Re 𝔥(R)` at the pre-check
/// order has an eigenvalue below `−POSITIVITY_TOL`.
fn check_positive(h: &FMRealization) -> Result<()> {
    let n = precheck_order(h.d());
    let op = toeplitz_from_symbol(&herglotz_symbol(&h.series(n)?, n)?, n)?;
    if focktrunc::min_eig_at_least(&op, POSITIVITY_TOL)? {
        return Ok(());
    }
    Err(NcError::NotPositive { min_eig: focktrunc::min_eig(&op)? })
}

/// Multiplies by the unimodular constant making the value at 0 real and non-negative.
fn phase_normalize(f: &FMRealization) -> FMRealization {
    let v = f.d0();
    if v.norm() == 0.0 {
        return f.clone();
    }
    f.scale(v.conj() / v.norm())
}

/// Outputs of [`factor_toeplitz_detailed`].
#[derive(Clone, Debug)]
pub struct Factorization {
    /// Minimized, phase-normalized `𝔡 = 𝔞 (1 − 𝔟)⁻¹`.
    pub factor: FMRealization,
    /// Block realization built on two copies of the state space of `𝔥`, phase-normalized.
    pub block: FMRealization,
    /// Inverse Cayley transform of `𝔥`.
    pub b: FMRealization,
    /// Sarason function of `b`, absent when `b` is inner.
    pub a: Option<FMRealization>,
    /// State dimension of `a · (1 − b)⁻¹` before minimization.
    pub generic_dim: usize,
    pub block_dim: usize,
    /// State dimension of the minimized block realization.
    pub block_minimal_dim: usize,
    /// Largest coefficient gap between the block and generic factors up to order 6.
    pub block_defect: f64,
}

/// `𝔡` with `Re 𝔥(R) = 𝔡(R)*𝔡(R)` and `𝔡(0) >= 0`.
pub fn factor_toeplitz(h: &FMRealization) -> Result<FMRealization> {
    let f = factor_toeplitz_detailed(h)?;
    debug_assert!(f.block_defect <= 1e-6 * f.factor.d0().norm().max(1.0), "block defect {:e}", f.block_defect);
    Ok(f.factor)
}

pub fn factor_toeplitz_detailed(h: &FMRealization) -> Result<Factorization> {
    let d = h.d();
    let hm = h.minimize(RANK_TOL);
    if (hm.d0() + ONE).norm() < INVERT_TOL {
        return Err(NcError::SingularAtZero { detail: format!("h(0) + 1 = {}", hm.d0() + ONE) });
    }
    check_positive(&hm)?;
    let b = cayley_inverse(&hm)?;
    let cl = classify(&b);
    match cl.verdict {
        Verdict::NonCE => {}
        Verdict::Inner => {
            let zero = FMRealization::constant(d, ZERO);
            return Ok(Factorization {
                factor: zero.clone(),
                block: zero,
                b,
                a: None,
                generic_dim: 0,
                block_dim: 0,
                block_minimal_dim: 0,
                block_defect: 0.0,
            });
        }
        Verdict::Indeterminate => return Err(NcError::Indeterminate(cl.evidence.detail.unwrap_or_default())),
        Verdict::NotContractive => return Err(NcError::NotContractive(cl.evidence.detail.unwrap_or_default())),
    }
    let a = sarason::sarason(&b)?;
    let one = FMRealization::constant(d, ONE);
    let generic = a.mul(&one.sub(&b)?.invert(INVERT_TOL)?)?;
    let generic_dim = generic.n();
    let factor = phase_normalize(&generic.minimize(RANK_TOL));

    let block = phase_normalize(&block_factor(&hm)?);
    let check = 6.min(max_order(d, 1 << 12));
    let block_defect = block.series(check)?.max_abs_diff(&factor.series(check)?, check)?;
    Ok(Factorization {
        block_dim: block.n(),
        block_minimal_dim: block.minimize(RANK_TOL).n(),
        factor,
        block,
        b,
        a: Some(a),
        generic_dim,
        block_defect,
    })
}

/// Largest order whose word count stays within `cap`.
fn max_order(d: usize, cap: usize) -> usize {
    let mut n = 0;
    while num_words(d, n + 1).is_some_and(|w| w <= cap) {
        n += 1;
    }
    n
}

/// `𝔞 (1 − 𝔟)⁻¹` assembled from a minimal realization `(A, B, C, D)` of `𝔥`:
/// `(1 − 𝔟)⁻¹ = (A, B, C/2, D')` with `D' = (1 + D)/2`, `𝔟` lives on the flipped
/// tuple `A_j − B_j C/(2D')`, and `𝔞` reuses it with the Riccati output row.
fn block_factor(h: &FMRealization) -> Result<FMRealization> {
    let n = h.n();
    let d = h.d();
    let dp = (ONE + h.d0()) * 0.5;
    let half = h.c().map(|z| z * 0.5);
    let ax: Vec<CMat> = h.a().iter().zip(h.b()).map(|(aj, bj)| aj - linalg::col(bj) * half.transpose() / dp).collect();
    let bx: Vec<CVec> = h.b().iter().map(|bj| bj / dp).collect();
    // 𝔟 = 1 − (1 − 𝔟) on the flipped realization
    let b = FMRealization::new(ax.clone(), bx.clone(), half.map(|z| z / dp), ONE - ONE / dp)?;
    let ric = riccati_min(&b)?;
    if ric.inner {
        return Err(NcError::InnerSymbol);
    }
    let a0 = ric.a0_squared.sqrt();
    let ca = ric.v.map(|z| -z.conj() / a0);

    let mut a_hat = Vec::with_capacity(d);
    let mut b_hat = Vec::with_capacity(d);
    for j in 0..d {
        let mut m = CMat::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&ax[j]);
        m.view_mut((0, n), (n, n)).copy_from(&(linalg::col(&bx[j]) * half.transpose()));
        m.view_mut((n, n), (n, n)).copy_from(&h.a()[j]);
        a_hat.push(m);
        let mut v = CVec::zeros(2 * n);
        v.rows_mut(0, n).copy_from(&(&bx[j] * dp));
        v.rows_mut(n, n).copy_from(&h.b()[j]);
        b_hat.push(v);
    }
    let mut c_hat = CVec::zeros(2 * n);
    c_hat.rows_mut(0, n).copy_from(&ca);
    c_hat.rows_mut(n, n).copy_from(&(&half * cr(a0)));
    FMRealization::new(a_hat, b_hat, c_hat, cr(a0) * dp)
}

/// Coefficient-level check of `Re 𝔥(R) = 𝔡(R)*𝔡(R)` on words of length `<= n`,
/// together with the colligation defects of `(𝔟; 𝔞)`; same schema as [`verify_column`].
pub fn verify_factor(h: &FMRealization, factor: &FMRealization, n: usize, tol: f64) -> Result<ColumnReport> {
    let d = h.d();
    let target = herglotz_symbol(&h.series(n)?, n)?;
    let sym = rational_gram_symbol(factor, n, (tol * 1e-2).max(1e-15))?;
    if sym.tail > tol {
        return Err(NcError::OrderExceeded { requested: n, available: sym.t.order() });
    }
    let coefficient_defect = sym.t.max_abs_diff(&target, n)?;
    let b = cayley_inverse(&h.minimize(RANK_TOL))?;
    let (iso, coiso) = if factor.d0().norm() == 0.0 && factor.n() == 0 {
        (0.0, 0.0)
    } else {
        // 𝔞 = 𝔡 (1 − 𝔟)
        let a = factor.mul(&FMRealization::constant(d, ONE).sub(&b)?)?.minimize(RANK_TOL);
        let rep = verify_column(&b, &a, n, tol)?;
        (rep.colligation_defect_iso, rep.colligation_defect_coiso)
    };
    let pass = iso <= tol && coiso <= tol && coefficient_defect <= tol;
    Ok(ColumnReport { colligation_defect_iso: iso, colligation_defect_coiso: coiso, coefficient_defect, order: n, pass })
}

/// Outer `𝔡` with `𝔡(R)*𝔡(R) = r(R)*r(R)`.
pub fn square_factor(r: &FMRealization) -> Result<FMRealization> {
    factor_toeplitz(&herglotz_square(r)?)
}

/// `h` with `hᵗ = 𝔞 (1 − 𝔟)⁻¹`, minimized; its moments `⟨h, L^ω h⟩` are the
/// absolutely continuous part of the Clark measure of `b`.
pub fn radon_nikodym(b: &FMRealization) -> Result<FMRealization> {
    let a = sarason::sarason(b)?;
    let one = FMRealization::constant(b.d(), ONE);
    let ht = a.mul(&one.sub(b)?.invert(INVERT_TOL)?)?.minimize(RANK_TOL);
    Ok(ht.transpose().minimize(RANK_TOL))
}

/// `μ(L^ω) = ⟨h, L^ω h⟩` for words of length `<= maxlen`, in the pairing that
/// is linear in the first slot: `Σ_v conj(h_v) h_{ωv}`.
pub fn density_moments(h: &FMRealization, maxlen: usize) -> Result<NCMeasureMoments> {
    Ok(NCMeasureMoments { moments: realization_symbol(&h.transpose(), maxlen)?.conj() })
}

/// Clark moments of `b`: `μ(L^∅) = Re H(0)`, `μ(L^ω) = Ĥ_{ωᵗ}/2` with `H = (1 + b)(1 − b)⁻¹`.
pub fn clark_moments(b: &FMRealization, maxlen: usize) -> Result<NCMeasureMoments> {
    let h = cayley(b)?.series(maxlen)?;
    let moments = FreeSeries::from_fn(b.d(), maxlen, |w| {
        let v = h.get(&w.reverse()).unwrap();
        if w.is_empty() {
            cr(v.re)
        } else {
            v * 0.5
        }
    })?;
    Ok(NCMeasureMoments { moments })
}

/// `H_μ(Z) = μ(L^∅) I + 2 Σ_{ω≠∅} Z^{ωᵗ} μ(L^ω)` summed over the available words.
///
/// The tail estimate is `2 M r^{N+1}/(1 − r)` with `r` the row norm of `Z` and
/// `M` the larger Fock norm of the last two available levels of moments, standing
/// in for the levels beyond `N`; `OrderExceeded` when it exceeds `tol`.
pub fn herglotz_eval(mu: &NCMeasureMoments, z: &MatrixTuple, tol: f64) -> Result<CMat> {
    let d = mu.d();
    if z.d() != d {
        return Err(NcError::DimensionMismatch(format!("tuple has {} letters, measure {d}", z.d())));
    }
    let order = mu.order();
    let r = z.row_norm_sq().sqrt();
    let mass = (order.saturating_sub(1)..=order).map(|k| mu.moments.level_energy(k)).fold(0.0, f64::max).sqrt();
    let tail = if r < 1.0 { 2.0 * mass * r.powi(order as i32 + 1) / (1.0 - r) } else { f64::INFINITY };
    if !(tail <= tol) {
        return Err(NcError::OrderExceeded { requested: order + 1, available: order });
    }
    let n = z.n();
    let total = num_words(d, order).ok_or(NcError::CapExceeded { entries: usize::MAX })?;
    // powers[i] = Z^{ωᵗ} for ω = word_at(i), built by prepending the last letter
    let mut powers: Vec<CMat> = Vec::with_capacity(total);
    let mut out = CMat::identity(n, n) * cr(mu.moments.at(0).re);
    for i in 0..total {
        let w = word_at(i, d);
        if w.is_empty() {
            powers.push(CMat::identity(n, n));
            continue;
        }
        let l = w.letters();
        let parent = word_index(&Word::new(l[..l.len() - 1].to_vec()), d);
        let p = z.get(l[l.len() - 1] as usize - 1) * &powers[parent];
        out += &p * (mu.moments.at(i) * 2.0);
        powers.push(p);
    }
    Ok(out)
}

/// Summary of a Fejér–Riesz run, for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSizes {
    pub herglotz_dim: usize,
    pub factor_dim: usize,
    pub generic_dim: usize,
    pub block_dim: usize,
    pub block_minimal_dim: usize,
}

impl Factorization {
    pub fn sizes(&self, h: &FMRealization) -> FactorSizes {
        FactorSizes {
            herglotz_dim: h.minimize(RANK_TOL).n(),
            factor_dim: self.factor.n(),
            generic_dim: self.generic_dim,
            block_dim: self.block_dim,
            block_minimal_dim: self.block_minimal_dim,
        }
    }
}
