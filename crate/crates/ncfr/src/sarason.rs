//! Inner / non-column-extreme classification, the Sarason outer function and
//! checks that the column `(b; a)` is inner.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NcError, Result};
use crate::focktrunc::{self, rational_gram_symbol, realization_symbol, toeplitz_from_symbol, TruncatedOperator};
use crate::freecore::{num_words, word_at, word_index, FreeSeries, Word};
use crate::kernels::{
    build_gram_space, kernel_rep, riccati_min, state_kernel, DbrModel, GramSpace, KernelCombo, KernelPoint,
    INNER_TOL,
};
use crate::linalg::{self, cr, CMat, CVec, ONE, ZERO};
use crate::realize::{cp_radius, FMRealization, RANK_TOL};

/// `a(0)²` at or above this value is reported as non-CE.
pub const NONCE_TOL: f64 = 1e-8;
/// Truncation order of the Fock-space contractivity pre-check.
pub const PRECHECK_ORDER: usize = 8;
/// Largest pre-check truncation; the order is lowered until it fits.
pub const PRECHECK_MAX_DIM: usize = 1200;
/// Smallest eigenvalue tolerated by the pre-check.
pub const PRECHECK_TOL: f64 = -1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Inner,
    NonCE,
    NotContractive,
    Indeterminate,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub state_dim: usize,
    pub cp_radius: f64,
    pub precheck_order: usize,
    /// Smallest eigenvalue of the pre-check truncation, computed when positivity fails.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precheck_min_eig: Option<f64>,
    pub h2_defect: f64,
    pub riccati_iterations: usize,
    pub riccati_residual: f64,
    pub gram_min_eig: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub a0_squared: f64,
    pub evidence: Evidence,
}

impl Classification {
    fn not_contractive(a0_squared: f64, mut evidence: Evidence, detail: String) -> Self {
        evidence.detail = Some(detail);
        Classification { verdict: Verdict::NotContractive, a0_squared, evidence }
    }
}

/// Pre-check order for `d` letters: [`PRECHECK_ORDER`], lowered until the
/// truncation has at most [`PRECHECK_MAX_DIM`] words.
pub fn precheck_order(d: usize) -> usize {
    let mut n = PRECHECK_ORDER;
    while n > 1 && num_words(d, n).is_none_or(|w| w > PRECHECK_MAX_DIM) {
        n -= 1;
    }
    n
}

/// Truncated `I − b(R)*b(R)` at the pre-check order.
fn precheck_operator(b: &FMRealization) -> Result<TruncatedOperator> {
    let n = precheck_order(b.d());
    let t = FreeSeries::unit(b.d(), n)?.sub(&realization_symbol(b, n)?)?;
    toeplitz_from_symbol(&t, n)
}

pub fn classify(b: &FMRealization) -> Classification {
    let bm = b.minimize(RANK_TOL);
    let mut ev = Evidence { state_dim: bm.n(), ..Default::default() };
    ev.cp_radius = if bm.n() == 0 { 0.0 } else { cp_radius(bm.a()) };
    if ev.cp_radius >= 1.0 {
        let detail = format!("state tuple not pure (cp radius {:.6})", ev.cp_radius);
        return Classification::not_contractive(0.0, ev, detail);
    }
    let verdict = precheck_operator(&bm).and_then(|op| {
        ev.precheck_order = op.order();
        if focktrunc::min_eig_at_least(&op, -PRECHECK_TOL)? {
            return Ok(None);
        }
        let lmin = focktrunc::min_eig(&op)?;
        ev.precheck_min_eig = Some(lmin);
        Ok(Some(format!("truncated I - b*b has eigenvalue {lmin:.3e}")))
    });
    match verdict {
        Ok(None) => {}
        Ok(Some(detail)) => return Classification::not_contractive(0.0, ev, detail),
        Err(e) => return Classification::not_contractive(0.0, ev, e.to_string()),
    }
    let ric = match riccati_min(&bm) {
        Ok(r) => r,
        Err(e) => return Classification::not_contractive(0.0, ev, e.to_string()),
    };
    ev.h2_defect = ric.h2_defect;
    ev.riccati_iterations = ric.iterations;
    ev.riccati_residual = ric.residual;
    ev.gram_min_eig = if ric.g.is_empty() { 0.0 } else { linalg::lambda_min(&ric.g) };
    let a0 = ric.a0_squared.clamp(0.0, 1.0);
    let verdict = if a0 <= INNER_TOL {
        Verdict::Inner
    } else if a0 >= NONCE_TOL {
        Verdict::NonCE
    } else {
        ev.detail = Some(format!("a(0)^2 = {a0:.3e} lies between {INNER_TOL:e} and {NONCE_TOL:e}"));
        Verdict::Indeterminate
    };
    Classification { verdict, a0_squared: a0, evidence: ev }
}

/// `a(0)² = 1 − |b(0)|² − ‖**b**‖²_b`.
pub fn a0_squared(b: &FMRealization) -> Result<f64> {
    Ok(riccati_min(&b.minimize(RANK_TOL))?.a0_squared.clamp(0.0, 1.0))
}

/// Sarason outer function of a non-CE contractive `b`, minimized, with `a(0) > 0`.
pub fn sarason(b: &FMRealization) -> Result<FMRealization> {
    let cl = classify(b);
    match cl.verdict {
        Verdict::NonCE => {}
        Verdict::Inner => return Err(NcError::InnerSymbol),
        Verdict::Indeterminate => return Err(NcError::Indeterminate(cl.evidence.detail.unwrap_or_default())),
        Verdict::NotContractive => return Err(NcError::NotContractive(cl.evidence.detail.unwrap_or_default())),
    }
    let gs = build_gram_space(b)?;
    let a = gs.outer_mate().ok_or(NcError::InnerSymbol)?;
    Ok(a.minimize(RANK_TOL))
}

/// Coefficients `â_∅ = a(0)`, `â_ω = −a(0)⟨bᵗ, X^ω bᵗ⟩_b` with
/// `X^ω = X_{i1} X_{i2} ⋯ X_{ik}` for `ω = i1 i2 ⋯ ik`.
pub fn sarason_coefficients(gs: &GramSpace, order: usize) -> Result<FreeSeries> {
    let bt = gs.bt_coords.as_ref().ok_or(NcError::InnerSymbol)?;
    let d = gs.b.d();
    let a0 = gs.a0_squared.sqrt();
    let total = num_words(d, order).filter(|&w| w <= crate::freecore::SERIES_CAP).ok_or(NcError::CapExceeded {
        entries: usize::MAX,
    })?;
    // coordinates of X_j bᵗ = L_j* bᵗ, whose state is B_j
    let gw_inv = linalg::inverse(&gs.g)?;
    let coords = |x: &CVec| &gw_inv * (gs.basis_states.adjoint() * (&gs.riccati.g * x));
    let first: Vec<CVec> = gs.b.b().iter().map(coords).collect();
    let row = bt.adjoint() * &gs.g;
    let mut vecs: Vec<CVec> = Vec::with_capacity(total);
    let mut coeffs = Vec::with_capacity(total);
    for i in 0..total {
        let w = word_at(i, d);
        let v = match w.len() {
            0 => {
                vecs.push(CVec::zeros(0));
                coeffs.push(cr(a0));
                continue;
            }
            1 => first[w.letters()[0] as usize - 1].clone(),
            _ => {
                let rest = Word::new(w.letters()[1..].to_vec());
                &gs.xmat[w.letters()[0] as usize - 1] * &vecs[word_index(&rest, d)]
            }
        };
        coeffs.push(-(&row * &v)[(0, 0)] * a0);
        vecs.push(v);
    }
    FreeSeries::from_dense(d, order, coeffs)
}

/// `Σ_{|α|=k} ‖X^α **b**‖²_b` for `k = 0..levels`.
pub fn weak_purity_profile(gs: &GramSpace, levels: usize) -> Vec<f64> {
    let bm = &gs.b;
    let g = &gs.riccati.g;
    let n = bm.n();
    let mut p = CMat::zeros(n, n);
    for bj in bm.b() {
        p += linalg::col(bj) * linalg::col(bj).adjoint();
    }
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        out.push((g * &p).trace().re);
        p = bm.a().iter().fold(CMat::zeros(n, n), |acc, aj| acc + aj * &p * aj.adjoint());
    }
    out
}

/// Route-two model of `ℋᵗ(b)` restricted to `M₀(b)`, in the state
/// coordinates of the minimal realization `gs.b`.
struct ColumnModel {
    gs: GramSpace,
    model: DbrModel,
    /// `S e_i`.
    states: Vec<KernelPoint>,
    bt: KernelPoint,
    /// `G₂[i,k] = ⟨S e_i, S e_k⟩_b`.
    g2: CMat,
    /// `u_i = ⟨S e_i, bᵗ⟩_b`.
    u: CVec,
}

fn single(p: &KernelPoint) -> KernelCombo {
    vec![(ONE, p.clone())]
}

impl ColumnModel {
    fn new(b: &FMRealization) -> Result<Self> {
        let gs = build_gram_space(b)?;
        let model = DbrModel::from_gram_space(&gs);
        let n = gs.b.n();
        let states: Vec<KernelPoint> = (0..n)
            .map(|i| {
                let mut e = CVec::zeros(n);
                e[i] = ONE;
                state_kernel(&gs.b, &e)
            })
            .collect::<Result<_>>()?;
        let bt = kernel_rep(&gs.b)?;
        let mut g2 = CMat::zeros(n, n);
        let mut u = CVec::zeros(n);
        for i in 0..n {
            for k in i..n {
                let val = model.pairing(&states[i], &states[k])?;
                g2[(i, k)] = val;
                g2[(k, i)] = val.conj();
            }
            u[i] = model.pairing(&states[i], &bt)?;
        }
        Ok(ColumnModel { gs, model, states, bt, g2, u })
    }

    fn n(&self) -> usize {
        self.gs.b.n()
    }

    fn scale(&self) -> f64 {
        linalg::max_abs(&self.g2).max(1.0)
    }

    /// `S x` as a combination of the basis kernels.
    fn combo(&self, x: &CVec) -> KernelCombo {
        x.iter().zip(&self.states).filter(|(c, _)| **c != ZERO).map(|(c, p)| (*c, p.clone())).collect()
    }

    /// `‖U_c* U_c − I‖` on `M₀ ⊕ ℂ` with `c = (b; a)`, `a` given by `(C_a, D_a)` on the state space.
    fn iso_defect(&self, ca: &CVec, da: Complex64) -> f64 {
        let b = &self.gs.b;
        let n = self.n();
        let g = &self.g2;
        let cb = b.c();
        let mut top = -g.clone();
        let mut off = CVec::zeros(n);
        let mut corner = b.d0().norm_sqr() + da.norm_sqr() - 1.0;
        for j in 0..b.d() {
            let (aj, bj) = (&b.a()[j], &b.b()[j]);
            top += aj.adjoint() * g * aj;
            off += aj.adjoint() * (g * bj);
            corner += bj.dotc(&(g * bj)).re;
        }
        let cbc = cb.map(|z| z.conj());
        let cac = ca.map(|z| z.conj());
        top += linalg::col(&cbc) * linalg::col(&cbc).adjoint() + linalg::col(&cac) * linalg::col(&cac).adjoint();
        off += cbc * b.d0() + cac * da;
        let worst = linalg::max_abs(&top).max(off.iter().map(|z| z.norm()).fold(0.0, f64::max)).max(corner.abs());
        worst / self.scale()
    }

    /// `‖U_c U_c* − I‖` on `M₀^d ⊕ ℂ²`, through the adjoint on the full space:
    /// `U_c*(f, α, β) = (Σ_j (z_j f_j − ⟨**b**_j, f_j⟩ bᵗ) + α K₀ + β r_a, Σ_j ⟨**b**_j, f_j⟩ + conj(b(0)) α + conj(D_a) β)`,
    /// where `r_a` represents `C_a` on `M₀` and `−D_a ⟨bᵗ, ·⟩` on its complement.
    fn coiso_defect(&self, ca: &CVec, da: Complex64) -> Result<f64> {
        let b = &self.gs.b;
        let (n, d) = (self.n(), b.d());
        let g = &self.g2;
        let b0 = b.d0();
        // P₀ bᵗ = S p with G₂ p = u; the fitted row is represented by S q with G₂ q = conj(C_a)
        let p = linalg::solve(g, &linalg::col(&self.u))?.column(0).into_owned();
        let q = linalg::solve(g, &linalg::col(&ca.map(|z| z.conj())))?.column(0).into_owned();
        let mut r_a: KernelCombo = self.combo(&(q + p * da));
        r_a.push((-da, self.bt.clone()));
        let mut k0: KernelCombo = single(&KernelPoint::one(d));
        k0.push((-b0.conj(), self.bt.clone()));

        // images (F, σ) and the Gram of the source vectors
        let mut images: Vec<(KernelCombo, Complex64)> = Vec::with_capacity(d * n + 2);
        for j in 0..d {
            let gb = g * &b.b()[j];
            for i in 0..n {
                let bf = gb[i].conj(); // ⟨**b**_j, S e_i⟩
                let mut f = single(&self.states[i].left_multiply(j + 1));
                f.push((-bf, self.bt.clone()));
                images.push((f, bf));
            }
        }
        images.push((k0, b0.conj()));
        images.push((r_a, da.conj()));
        let m = images.len();
        let mut source = CMat::zeros(m, m);
        for j in 0..d {
            source.view_mut((j * n, j * n), (n, n)).copy_from(g);
        }
        source[(d * n, d * n)] = ONE;
        source[(d * n + 1, d * n + 1)] = ONE;
        let mut worst = 0.0f64;
        for x in 0..m {
            for y in x..m {
                let val = self.model.pair_combos(&images[x].0, &images[y].0)? + images[x].1.conj() * images[y].1;
                worst = worst.max((val - source[(x, y)]).norm());
            }
        }
        Ok(worst / self.scale())
    }
}

/// Least-squares fit of `a`'s coefficients onto the reachable states of `b`:
/// returns `(C_a, D_a, residual)` with `a_{ωj} ≈ C_a A^ω B_j`.
fn fit_column(b: &FMRealization, a: &FMRealization) -> Result<(CVec, Complex64, f64)> {
    if a.d() != b.d() {
        return Err(NcError::DimensionMismatch("b and a use different alphabets".into()));
    }
    let (n, d) = (b.n(), b.d());
    let da = a.d0();
    if n == 0 {
        let s = a.series(2)?;
        return Ok((CVec::zeros(0), da, (s.level_energy(1) + s.level_energy(2)).sqrt()));
    }
    let mut len = 1;
    while len < n + 1 && num_words(d, len + 1).is_some_and(|w| w <= 4096) {
        len += 1;
    }
    let words: Vec<Word> = (1..num_words(d, len).unwrap()).map(|i| word_at(i, d)).collect();
    // state of ω = i1..ik is A_{i1} ⋯ A_{i(k−1)} B_{ik}
    let state = |w: &Word| {
        let l = w.letters();
        let mut x = b.b()[l[l.len() - 1] as usize - 1].clone();
        for &j in l[..l.len() - 1].iter().rev() {
            x = &b.a()[j as usize - 1] * x;
        }
        x
    };
    let xs = CMat::from_columns(&words.iter().map(state).collect::<Vec<_>>());
    let coeffs = CVec::from_iterator(words.len(), words.iter().map(|w| a.coeff(w)));
    // C_a X = α  ⇔  Xᵀ C_aᵀ = αᵀ
    let svd = xs.transpose().svd(true, true);
    let sol = svd.solve(&linalg::col(&coeffs), 1e-12).map_err(|e| NcError::InvalidInput(e.to_string()))?;
    let ca = sol.column(0).into_owned();
    let fit = FMRealization::new(b.a().to_vec(), b.b().to_vec(), ca.clone(), da)?;
    let mut check = 2 * len + 2;
    while check > len && num_words(d, check).is_none_or(|w| w > 1 << 16) {
        check -= 1;
    }
    let resid = fit.series(check)?.max_abs_diff(&a.series(check)?, check)?;
    Ok((ca, da, resid))
}

/// Report of [`verify_column`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub colligation_defect_iso: f64,
    pub colligation_defect_coiso: f64,
    pub coefficient_defect: f64,
    pub order: usize,
    pub pass: bool,
}

/// Checks that `c = (b; a)` is inner: colligation unitarity in the
/// de Branges–Rovnyak metric and `⟨Lᵅ1, (a*a + b*b) Lᵝ1⟩ = δ_{αβ}` for `|α|, |β| <= n`.
pub fn verify_column(b: &FMRealization, a: &FMRealization, n: usize, tol: f64) -> Result<ColumnReport> {
    let cm = ColumnModel::new(b)?;
    let (ca, da, fit) = fit_column(&cm.gs.b, a)?;
    let iso = cm.iso_defect(&ca, da).max(fit);
    let coiso = cm.coiso_defect(&ca, da)?.max(fit);

    // coefficient check; entries of the Toeplitz form are its symbol values
    let target = (tol * 1e-2).max(1e-15);
    let sb = rational_gram_symbol(b, n, target)?;
    let sa = rational_gram_symbol(a, n, target)?;
    for s in [&sb, &sa] {
        if s.tail > tol {
            return Err(NcError::OrderExceeded { requested: n, available: s.t.order() });
        }
    }
    let total = sb.t.add(&sa.t)?;
    let one = FreeSeries::unit(b.d(), n)?;
    let coefficient_defect = total.max_abs_diff(&one, n)?;
    let pass = iso <= tol && coiso <= tol && coefficient_defect <= tol;
    Ok(ColumnReport { colligation_defect_iso: iso, colligation_defect_coiso: coiso, coefficient_defect, order: n, pass })
}

/// Residuals of the structural identities of the compressed model of a non-CE `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    /// `Σ_j A_j* G A_j − (G − C*C − a(0)² w w*)`.
    pub rank2_defect: f64,
    /// `⟨S e_k, z_j S e_i⟩_b − ⟨**b**_j, S e_i⟩_b ⟨S e_k, bᵗ⟩_b` against `(A_j* G)[k,i]`.
    pub adjx_defect: f64,
    /// `‖bᵗ‖²_b − (1/a(0)² − 1)`.
    pub bt_norm_defect: f64,
    /// Distance between the Riccati Gram and the route-two Gram.
    pub gram_agreement: f64,
    pub iso_defect: f64,
    pub coiso_defect: f64,
    pub a0_squared: f64,
}

pub fn structural_identities(b: &FMRealization) -> Result<StructuralReport> {
    let cm = ColumnModel::new(b)?;
    if cm.gs.riccati.inner {
        return Err(NcError::InnerSymbol);
    }
    let bm = &cm.gs.b;
    let (n, d) = (bm.n(), bm.d());
    let g = &cm.g2;
    let a0sq = cm.gs.a0_squared;
    let scale = cm.scale();

    let cbc = bm.c().map(|z| z.conj());
    let mut lhs = CMat::zeros(n, n);
    for aj in bm.a() {
        lhs += aj.adjoint() * g * aj;
    }
    let rhs = g - linalg::col(&cbc) * linalg::col(&cbc).adjoint() - linalg::col(&cm.u) * linalg::col(&cm.u).adjoint() * cr(a0sq);
    let rank2_defect = linalg::max_abs(&(lhs - rhs)) / scale;

    let mut adjx = 0.0f64;
    for j in 0..d {
        let gb = g * &bm.b()[j];
        let expect = bm.a()[j].adjoint() * g;
        for i in 0..n {
            let shifted = cm.states[i].left_multiply(j + 1);
            for k in 0..n {
                let y = cm.model.pairing(&cm.states[k], &shifted)? - gb[i].conj() * cm.u[k];
                adjx = adjx.max((y - expect[(k, i)]).norm());
            }
        }
    }
    let bt_norm = cm.model.pairing(&cm.bt, &cm.bt)?.re;
    let bt_norm_defect = (bt_norm - (1.0 / a0sq - 1.0)).abs();
    let gram_agreement = linalg::max_abs(&(&cm.gs.riccati.g - g)) / scale;
    let (ca, da) = (cm.gs.riccati.v.map(|z| -z.conj() / a0sq.sqrt()), cr(a0sq.sqrt()));
    Ok(StructuralReport {
        rank2_defect,
        adjx_defect: adjx / scale,
        bt_norm_defect,
        gram_agreement,
        iso_defect: cm.iso_defect(&ca, da),
        coiso_defect: cm.coiso_defect(&ca, da)?,
        a0_squared: a0sq,
    })
}
