//! Stein solves, NC Szegő kernel vectors and the compressed de Branges–Rovnyak
//! model of a contractive rational symbol.
//!
//! Inner products are conjugate-linear in the first slot. A kernel vector
//! `K{Z,y,v}` has coefficients `conj(y* Z^ω v)`, so `⟨K{Z,y,v}, f⟩ = y* f(Z) v`.

use num_complex::Complex64;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::dd::{recip, Cdd, DdMat};
use crate::error::{NcError, Result};
use crate::freecore::{FreeSeries, Word};
use crate::linalg::{self, cr, CMat, CVec, ONE, ZERO};
use crate::realize::{
    descriptor_from_fm, mat_to_rows, rescale_to_strict, vec_to_pairs, FMRealization, MatrixTuple, RANK_TOL,
};

/// `a(0)²` at or below this value is treated as zero.
pub const INNER_TOL: f64 = 1e-10;
/// Slack allowed before a negative defect counts as non-contractive.
pub const CONTRACTIVE_TOL: f64 = 1e-9;
/// Required relative residual of Stein solves.
pub const STEIN_RESIDUAL_TOL: f64 = 1e-12;

const NEWTON_MAX_ITER: usize = 400;
/// Largest accepted Riccati residual, relative to the solution.
const RICCATI_RESIDUAL_TOL: f64 = 1e-7;

/// Solves `Q − Σ_j Z_j Q W_j* = P` for strict row contractions `Z`, `W`.
pub fn stein(z: &MatrixTuple, w: &MatrixTuple, p: &CMat) -> Result<CMat> {
    if z.d() != w.d() {
        return Err(NcError::DimensionMismatch("tuples have different alphabet sizes".into()));
    }
    if p.nrows() != z.n() || p.ncols() != w.n() {
        return Err(NcError::DimensionMismatch("right-hand side has the wrong shape".into()));
    }
    let (rz, rw) = (z.row_norm_sq(), w.row_norm_sq());
    if !((rz * rw).sqrt() < 1.0) {
        return Err(NcError::NotContractive(format!(
            "Stein data not strictly contractive: ‖ZZ*‖ = {rz:.6}, ‖WW*‖ = {rw:.6}"
        )));
    }
    let q = linalg::stein_solve_raw(z.mats(), w.mats(), p)?;
    let res = linalg::stein_residual(z.mats(), w.mats(), p, &q);
    if res > STEIN_RESIDUAL_TOL && linalg::max_abs(&q) > 0.0 {
        // one step of iterative refinement
        let r = p - (&q - linalg::stein_map(z.mats(), &q, w.mats()));
        let dq = linalg::stein_solve_raw(z.mats(), w.mats(), &r)?;
        return Ok(q + dq);
    }
    Ok(q)
}

/// Szegő kernel vector `K{Z,y,v}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelPoint {
    pub z: MatrixTuple,
    pub y: CVec,
    pub v: CVec,
}

impl KernelPoint {
    pub fn new(z: MatrixTuple, y: CVec, v: CVec) -> Result<Self> {
        if y.len() != z.n() || v.len() != z.n() {
            return Err(NcError::DimensionMismatch("kernel vectors must match the point size".into()));
        }
        if !z.is_strict() {
            return Err(NcError::NotContractive("kernel point is not a strict row contraction".into()));
        }
        Ok(KernelPoint { z, y, v })
    }

    /// The constant function 1 as `K{0, 1, 1}`.
    pub fn one(d: usize) -> Self {
        KernelPoint { z: MatrixTuple::zeros(d, 1), y: CVec::from_element(1, ONE), v: CVec::from_element(1, ONE) }
    }

    pub fn d(&self) -> usize {
        self.z.d()
    }

    pub fn n(&self) -> usize {
        self.z.n()
    }

    pub fn coeff(&self, w: &Word) -> Complex64 {
        self.y.dotc(&(self.z.power(w) * &self.v)).conj()
    }

    pub fn series(&self, order: usize) -> Result<FreeSeries> {
        FreeSeries::from_fn(self.d(), order, |w| self.coeff(w))
    }

    pub fn with_y(&self, y: CVec) -> Self {
        KernelPoint { y, ..self.clone() }
    }

    pub fn with_v(&self, v: CVec) -> Self {
        KernelPoint { v, ..self.clone() }
    }

    /// `⟨K{Z,y,v}, K{W,u,w}⟩` in the Fock space.
    pub fn pair_h2(&self, other: &KernelPoint) -> Result<Complex64> {
        let p = linalg::col(&self.v) * linalg::col(&other.v).adjoint();
        let q = stein(&self.z, &other.z, &p)?;
        Ok(self.y.dotc(&(q * &other.y)))
    }

    /// Reproducing property `⟨K{Z,y,v}, f⟩ = y* f(Z) v`.
    pub fn reproduce(&self, f: &FMRealization) -> Result<Complex64> {
        Ok(self.y.dotc(&(f.eval(&self.z)? * &self.v)))
    }

    /// `L_j* K{Z,y,v} = K{Z, Z_j* y, v}` (letters `1..=d`).
    pub fn backward_shift(&self, j: usize) -> Self {
        self.with_y(self.z.get(j - 1).adjoint() * &self.y)
    }

    /// Kernel representation of `z_j · K{Z,y,v}` on a point enlarged by one.
    pub fn left_multiply(&self, j: usize) -> Self {
        let n = self.n();
        let rho = self.z.row_norm_sq();
        let ynorm = self.y.norm();
        if ynorm == 0.0 {
            return KernelPoint { z: MatrixTuple::zeros(self.d(), 1), y: CVec::zeros(1), v: CVec::zeros(1) };
        }
        let s = ((1.0 - rho) / (2.0 * (2.0 - rho))).sqrt();
        let t = s / ynorm;
        let z: Vec<CMat> = (1..=self.d())
            .map(|k| {
                let mut m = CMat::zeros(n + 1, n + 1);
                m.view_mut((0, 0), (n, n)).copy_from(self.z.get(k - 1));
                if k == j {
                    for c in 0..n {
                        m[(n, c)] = self.y[c].conj() * t;
                    }
                }
                m
            })
            .collect();
        let mut y = CVec::zeros(n + 1);
        y[n] = ONE;
        let mut v = CVec::zeros(n + 1);
        for i in 0..n {
            v[i] = self.v[i] / t;
        }
        KernelPoint { z: MatrixTuple::new(z).expect("square blocks"), y, v }
    }

    /// `f(R)* K{Z,y,v} = K{Z, y, fᵗ(Z) v}` given a realization of `fᵗ`.
    pub fn right_adjoint(&self, ft: &FMRealization) -> Result<Self> {
        Ok(self.with_v(ft.eval(&self.z)? * &self.v))
    }
}

/// Linear combination of kernel vectors.
pub type KernelCombo = Vec<(Complex64, KernelPoint)>;

/// Represents `bᵗ` as a kernel vector, using a strict rescaling of the
/// adjoint descriptor tuple.
pub fn kernel_rep(b: &FMRealization) -> Result<KernelPoint> {
    let bm = b.minimize(RANK_TOL);
    let desc = descriptor_from_fm(&bm);
    let adj: Vec<CMat> = desc.a().iter().map(|m| m.adjoint()).collect();
    let rs = rescale_to_strict(&adj)?;
    let z = MatrixTuple::new(rs.tuple.clone())?;
    let y = rs.s.adjoint() * desc.c();
    let v = &rs.s_inv * desc.b();
    KernelPoint::new(z, y, v).map_err(|e| NcError::NotPure(e.to_string()))
}

/// Kernel vector of the element `S x` of `M₀(b)` with coefficients
/// `(Sx)_σ = C A^{σᵗ} x` in the state coordinates of `b`.
pub fn state_kernel(b: &FMRealization, x: &CVec) -> Result<KernelPoint> {
    let adj: Vec<CMat> = b.a().iter().map(|m| m.adjoint()).collect();
    let rs = rescale_to_strict(&adj)?;
    let z = MatrixTuple::new(rs.tuple.clone())?;
    let y = rs.s.adjoint() * x;
    let v = &rs.s_inv * b.c().map(|c| c.conj());
    KernelPoint::new(z, y, v).map_err(|e| NcError::NotPure(e.to_string()))
}

/// Pairing of de Branges–Rovnyak kernel vectors
/// `y_p* (K(Z,W)[v_p v_q*] − K(Z,W)[bᵗ(Z) v_p v_q* bᵗ(W)*]) y_q`.
pub fn dbr_kernel_pairing(b: &FMRealization, p: &KernelPoint, q: &KernelPoint) -> Result<Complex64> {
    let bt = b.transpose();
    let plain = p.pair_h2(q)?;
    let shifted = p.right_adjoint(&bt)?.pair_h2(&q.right_adjoint(&bt)?)?;
    Ok(plain - shifted)
}

/// Gram matrix of de Branges–Rovnyak kernel vectors at one point,
/// `[y_i* Kᵇ(Z,Z)[v v*] y_k]`, checked for positivity.
pub fn dbr_kernel_gram(b: &FMRealization, z: &MatrixTuple, ys: &[CVec], v: &CVec, tol: f64) -> Result<CMat> {
    let bt = b.transpose();
    let pv = linalg::col(v) * linalg::col(v).adjoint();
    let k = stein(z, z, &pv)?;
    let btz = bt.eval(z)?;
    let kb = stein(z, z, &(&btz * &pv * btz.adjoint()))?;
    let kk = k - kb;
    let gram = CMat::from_fn(ys.len(), ys.len(), |i, j| ys[i].dotc(&(&kk * &ys[j])));
    let lmin = linalg::lambda_min(&gram);
    if lmin < -tol {
        return Err(NcError::NotContractive(format!("kernel Gram eigenvalue {lmin:.3e}")));
    }
    Ok(gram)
}

/// Minimal solution of the Riccati equation for the de Branges–Rovnyak Gram
/// on `M₀(b)`, in the state coordinates of a minimal realization.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    /// Gram matrix: `⟨Sx, Sy⟩_b = x* G y`.
    pub g: CMat,
    /// `v = D C* + Σ A_j* G B_j`; the functional `⟨bᵗ, S·⟩_b` is `x ↦ (v/a0²)* x`.
    pub v: CVec,
    pub a0_squared: f64,
    /// `1 − ‖b‖²` in the Fock space.
    pub h2_defect: f64,
    pub inner: bool,
    pub iterations: usize,
    /// Max-entry residual of the fixed-point equation, in double-double.
    pub residual: f64,
}

fn riccati_terms(b: &FMRealization, g: &CMat) -> (CMat, f64, CVec) {
    let n = b.n();
    let gd = DdMat::from_mat(g);
    let cconj = DdMat::from_col(&b.c().map(|z| z.conj()));
    let dd0 = Cdd::from_c(b.d0());
    let mut v = cconj.scale(TwoFloat::from(1.0));
    for x in v.data.iter_mut() {
        *x = *x * dd0;
    }
    let mut bgb = TwoFloat::from(0.0);
    let mut r = cconj.matmul(&cconj.adjoint());
    for j in 0..b.d() {
        let aj = DdMat::from_mat(&b.a()[j]);
        let bj = DdMat::from_col(&b.b()[j]);
        let ajs = aj.adjoint();
        let gb = gd.matmul(&bj);
        v = v.add(&ajs.matmul(&gb));
        bgb += bj.adjoint().matmul(&gb).get(0, 0).re;
        r = r.add(&ajs.matmul(&gd).matmul(&aj));
    }
    let s = TwoFloat::from(1.0) - dd0.norm_sqr() - bgb;
    let sf = f64::from(s);
    if n > 0 && sf > 0.0 {
        let outer = v.matmul(&v.adjoint()).scale(recip(s));
        r = r.add(&outer);
    }
    (r.sub(&gd).to_mat(), sf, v.to_col())
}

/// Newton iteration from the observability Gramian, with residuals formed
/// in double-double so that critical (boundary-zero) cases converge.
pub fn riccati_min(b: &FMRealization) -> Result<RiccatiSolution> {
    let n = b.n();
    if n == 0 {
        let s = 1.0 - b.d0().norm_sqr();
        if s < -CONTRACTIVE_TOL {
            return Err(NcError::NotContractive(format!("|b(0)| = {}", b.d0().norm())));
        }
        return Ok(RiccatiSolution {
            g: CMat::zeros(0, 0),
            v: CVec::zeros(0),
            a0_squared: s.max(0.0),
            h2_defect: s,
            inner: s <= INNER_TOL,
            iterations: 0,
            residual: 0.0,
        });
    }
    let wc = b.observability_gramian().map_err(|e| NcError::NotPure(e.to_string()))?;
    let wc = linalg::hermitian_part(&wc);
    let h2_defect = 1.0 - b.d0().norm_sqr()
        - b.b().iter().map(|v| (v.adjoint() * &wc * v)[(0, 0)].re).sum::<f64>();
    if h2_defect < -CONTRACTIVE_TOL {
        return Err(NcError::NotContractive(format!("Fock norm exceeds 1 by {:.3e}", -h2_defect)));
    }
    if h2_defect <= INNER_TOL {
        let (_, _, v) = riccati_terms(b, &wc);
        return Ok(RiccatiSolution {
            g: wc,
            v,
            a0_squared: h2_defect.max(0.0),
            h2_defect,
            inner: true,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut g = wc;
    let mut iterations = 0;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for it in 0..NEWTON_MAX_ITER {
        iterations = it + 1;
        let (rg, s, v) = riccati_terms(b, &g);
        if !(s > 0.0) {
            return Err(NcError::NotContractive(format!("Riccati defect became {s:.3e}")));
        }
        let k = &v / cr(s);
        let at: Vec<CMat> = (0..b.d())
            .map(|j| (&b.a()[j] + linalg::col(&b.b()[j]) * linalg::col(&k).adjoint()).adjoint())
            .collect();
        // in the critical case the closed-loop tuple approaches the unit sphere
        // and the last steps can be singular; keep the current iterate then
        let h = match linalg::stein_solve_raw(&at, &at, &rg) {
            Ok(h) => h,
            Err(_) if it > 0 => break,
            Err(_) => return Err(NcError::NotContractive("Newton step is singular".into())),
        };
        g = linalg::hermitian_part(&(g + &h));
        let step = linalg::max_abs(&h);
        let scale = linalg::max_abs(&g);
        if !(scale < 1e12) {
            return Err(NcError::NotContractive("Riccati iteration diverged".into()));
        }
        if step <= 1e-16 * scale {
            break;
        }
        if step < 0.75 * best {
            best = step;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 6 {
                break;
            }
        }
    }
    let (rg, s, v) = riccati_terms(b, &g);
    if !(s > 0.0) {
        return Err(NcError::NotContractive(format!("Riccati defect became {s:.3e}")));
    }
    if linalg::lambda_min(&g) < -CONTRACTIVE_TOL * linalg::max_abs(&g).max(1.0) {
        return Err(NcError::NotContractive("Gram matrix is not positive".into()));
    }
    let residual = linalg::max_abs(&rg);
    if residual > RICCATI_RESIDUAL_TOL * linalg::max_abs(&g).max(1.0) {
        return Err(NcError::NotContractive(format!(
            "Riccati equation has no solution (residual {residual:.3e})"
        )));
    }
    Ok(RiccatiSolution {
        g,
        v,
        a0_squared: s,
        h2_defect,
        inner: s <= INNER_TOL,
        iterations,
        residual,
    })
}

/// Compressed de Branges–Rovnyak model on `M₀(b)`.
#[derive(Clone, Debug)]
pub struct GramSpace {
    /// Minimal realization whose state coordinates underlie the model.
    pub b: FMRealization,
    /// Labels `ω` of the spanning vectors `L*^ω bᵗ`.
    pub basis: Vec<Word>,
    /// Gram matrix of the labelled vectors.
    pub g: CMat,
    /// Compression of `L_j*` in basis coordinates.
    pub xmat: Vec<CMat>,
    /// Coordinates of `P₀ bᵗ`; absent for inner symbols.
    pub bt_coords: Option<CVec>,
    /// Row `κ` with `⟨K₀, f⟩ = κ · coords(f)`.
    pub k0_functional: CVec,
    pub bb_norm_sq: f64,
    pub a0_squared: f64,
    /// Number of Gram eigenvalues above `1e-12 · trace`.
    pub rank: usize,
    /// State vectors of the basis, as columns.
    pub basis_states: CMat,
    pub riccati: RiccatiSolution,
}

/// State vector of `L*^ω bᵗ`: `A_{ik} ⋯ A_{i2} B_{i1}` for `ω = i1⋯ik`.
pub fn shifted_state(b: &FMRealization, w: &Word) -> CVec {
    let letters = w.letters();
    let mut x = b.b()[letters[0] as usize - 1].clone();
    for &l in &letters[1..] {
        x = &b.a()[l as usize - 1] * x;
    }
    x
}

pub fn build_gram_space(b: &FMRealization) -> Result<GramSpace> {
    let bm = b.minimize(RANK_TOL);
    let ric = riccati_min(&bm)?;
    let n = bm.n();
    let d = bm.d();
    let g = &ric.g;

    // greedy selection in the G-metric, degree-lex, level by level
    let mut basis: Vec<Word> = Vec::new();
    let mut ortho: Vec<CVec> = Vec::new();
    let mut level: Vec<(Word, CVec)> = (1..=d as u8).map(|j| (Word::letter(j), bm.b()[j as usize - 1].clone())).collect();
    let gnorm = |x: &CVec| x.dotc(&(g * x)).re.max(0.0).sqrt();
    while basis.len() < n && !level.is_empty() {
        let mut added = false;
        let mut next = Vec::new();
        for (w, x) in &level {
            let mut r = x.clone();
            for q in &ortho {
                let coef = q.dotc(&(g * &r));
                r -= q * coef;
            }
            let (rn, xn) = (gnorm(&r), gnorm(x));
            if basis.len() < n && rn > 1e-7 * xn.max(f64::MIN_POSITIVE) && rn > 0.0 {
                ortho.push(r / cr(rn));
                basis.push(w.clone());
                added = true;
            }
            for l in 1..=d as u8 {
                next.push((w.concat(&Word::letter(l)), &bm.a()[l as usize - 1] * x));
            }
        }
        if !added {
            break;
        }
        level = next;
    }
    let k = basis.len();
    let mut vmat = CMat::zeros(n, k);
    for (i, w) in basis.iter().enumerate() {
        vmat.set_column(i, &shifted_state(&bm, w));
    }
    let gw = linalg::hermitian_part(&(vmat.adjoint() * g * &vmat));
    let gw_inv = linalg::inverse(&gw).unwrap_or_else(|_| CMat::zeros(k, k));
    let xmat: Vec<CMat> = bm.a().iter().map(|aj| &gw_inv * vmat.adjoint() * g * aj * &vmat).collect();
    let bt_coords = if ric.inner {
        None
    } else {
        let w = &ric.v / cr(ric.a0_squared);
        Some(&gw_inv * (vmat.adjoint() * w))
    };
    let k0_functional = vmat.transpose() * bm.c();
    let bb_norm_sq = bm.b().iter().map(|x| x.dotc(&(g * x)).re).sum();
    let eig = linalg::eigvals_hermitian(&gw);
    let trace: f64 = eig.iter().sum();
    let rank = eig.iter().filter(|&&e| e > 1e-12 * trace).count();
    Ok(GramSpace {
        b: bm,
        basis,
        g: gw,
        xmat,
        bt_coords,
        k0_functional,
        bb_norm_sq,
        a0_squared: ric.a0_squared,
        rank,
        basis_states: vmat,
        riccati: ric,
    })
}

#[derive(Serialize)]
struct GramJson {
    d: usize,
    dim: usize,
    rank: usize,
    basis: Vec<Vec<u8>>,
    #[serde(rename = "G")]
    g: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "Xmat")]
    xmat: Vec<Vec<Vec<[f64; 2]>>>,
    bt_coords: Option<Vec<[f64; 2]>>,
    k0_functional: Vec<[f64; 2]>,
    bb_norm_sq: f64,
    a0_squared: f64,
}

impl GramSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let js = GramJson {
            d: self.b.d(),
            dim: self.dim(),
            rank: self.rank,
            basis: self.basis.iter().map(|w| w.letters().to_vec()).collect(),
            g: mat_to_rows(&self.g),
            xmat: self.xmat.iter().map(mat_to_rows).collect(),
            bt_coords: self.bt_coords.as_ref().map(vec_to_pairs),
            k0_functional: vec_to_pairs(&self.k0_functional),
            bb_norm_sq: self.bb_norm_sq,
            a0_squared: self.a0_squared,
        };
        serde_json::to_value(js).expect("gram space serializes")
    }

    /// Sarason outer function `(A, B, −v*/a(0), a(0))` in the model's state coordinates.
    pub fn outer_mate(&self) -> Option<FMRealization> {
        if self.riccati.inner {
            return None;
        }
        let a0 = self.a0_squared.sqrt();
        let ca = self.riccati.v.map(|z| -z.conj() / a0);
        Some(FMRealization::new(self.b.a().to_vec(), self.b.b().to_vec(), ca, cr(a0)).expect("consistent blocks"))
    }
}

/// Inner products in `ℋᵗ(b)` of Szegő kernel vectors.
///
/// For non-inner `b` this uses `‖f‖²_b = ‖f‖² + ‖f⁺‖²` with
/// `f⁺ = a(R)^{-*} b(R)* f`; for inner `b` the space carries the Fock norm.
#[derive(Clone, Debug)]
pub struct DbrModel {
    pub b: FMRealization,
    bt: FMRealization,
    at: Option<FMRealization>,
    pub a0_squared: f64,
}

impl DbrModel {
    pub fn new(b: &FMRealization) -> Result<Self> {
        Ok(Self::from_gram_space(&build_gram_space(b)?))
    }

    /// Model sharing the state coordinates of `gs.b`.
    pub fn from_gram_space(gs: &GramSpace) -> Self {
        let bt = gs.b.transpose();
        let at = gs.outer_mate().map(|a| a.transpose());
        DbrModel { b: gs.b.clone(), bt, at, a0_squared: gs.a0_squared }
    }

    pub fn is_inner(&self) -> bool {
        self.at.is_none()
    }

    /// `f⁺` for `f = K{Z,y,v}`.
    pub fn plus(&self, p: &KernelPoint) -> Result<Option<KernelPoint>> {
        let Some(at) = &self.at else { return Ok(None) };
        let bz = self.bt.eval(&p.z)?;
        let az = at.eval(&p.z)?;
        let u = linalg::solve(&az, &linalg::col(&(bz * &p.v)))?;
        Ok(Some(p.with_v(u.column(0).into_owned())))
    }

    pub fn pairing(&self, p: &KernelPoint, q: &KernelPoint) -> Result<Complex64> {
        let base = p.pair_h2(q)?;
        match (self.plus(p)?, self.plus(q)?) {
            (Some(pp), Some(qq)) => Ok(base + pp.pair_h2(&qq)?),
            _ => Ok(base),
        }
    }

    pub fn pair_combos(&self, f: &KernelCombo, g: &KernelCombo) -> Result<Complex64> {
        let mut acc = ZERO;
        for (cf, p) in f {
            for (cg, q) in g {
                acc += cf.conj() * cg * self.pairing(p, q)?;
            }
        }
        Ok(acc)
    }

    pub fn gram(&self, elems: &[KernelCombo]) -> Result<CMat> {
        let k = elems.len();
        let mut m = CMat::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let val = self.pair_combos(&elems[i], &elems[j])?;
                m[(i, j)] = val;
                m[(j, i)] = val.conj();
            }
        }
        Ok(m)
    }
}

/// `⟨K{Z,y,v}, K{W,u,w}⟩` in `ℋᵗ(b)`.
pub fn dbr_pairing(b: &FMRealization, p: &KernelPoint, q: &KernelPoint) -> Result<Complex64> {
    DbrModel::new(b)?.pairing(p, q)
}
