#![allow(dead_code)]

use ncfr::linalg::CMat;
use ncfr::ncparse::realize_str;
use ncfr::{Complex64, FMRealization, FreeSeries, Word};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn cz(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn r(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn w(letters: &[u8]) -> Word {
    Word::new(letters.to_vec())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn expr(text: &str, d: usize) -> FMRealization {
    realize_str(text, d).unwrap_or_else(|e| panic!("{text}: {e}"))
}

pub fn assert_close(a: Complex64, b: Complex64, tol: f64, what: &str) {
    assert!((a - b).norm() <= tol, "{what}: {a} vs {b} (tol {tol})");
}

pub fn assert_mat_close(a: &CMat, b: &CMat, tol: f64, what: &str) {
    assert_eq!(a.shape(), b.shape(), "{what}: shapes");
    let scale = b.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let err = (a - b).iter().map(|x| x.norm()).fold(0.0, f64::max);
    assert!(err <= tol * scale, "{what}: error {err:e}");
}

/// Coefficient series compared entrywise up to `order`.
pub fn assert_series_close(a: &FreeSeries, b: &FreeSeries, order: usize, tol: f64, what: &str) {
    let err = a.max_abs_diff(b, order).unwrap();
    assert!(err <= tol, "{what}: coefficient error {err:e}");
}

/// Coefficients of a d=1 realization as a vector.
pub fn coeffs_1d(f: &FMRealization, k: usize) -> Vec<Complex64> {
    let s = f.series(k).unwrap();
    (0..=k).map(|i| s.get(&Word::new(vec![1; i])).unwrap()).collect()
}

/// Random realization from a colligation `[[A_j, B_j]; [C, D]]` of norm `margin`,
/// so that `b` is contractive with multiplier norm at most `margin`.
pub fn random_contractive(g: &mut ChaCha8Rng, d: usize, n: usize, rho: f64, margin: f64) -> FMRealization {
    let raw = FMRealization::random(g, d, n, rho);
    let mut m = CMat::zeros(d * n + 1, n + 1);
    for j in 0..d {
        m.view_mut((j * n, 0), (n, n)).copy_from(&raw.a()[j]);
        m.view_mut((j * n, n), (n, 1)).copy_from(&raw.b()[j]);
    }
    m.view_mut((d * n, 0), (1, n)).copy_from(&raw.c().transpose());
    m[(d * n, n)] = raw.d0();
    let k = r(margin / ncfr::linalg::norm2(&m));
    FMRealization::new(
        raw.a().iter().map(|x| x * k).collect(),
        raw.b().iter().map(|x| x * k).collect(),
        raw.c() * k,
        raw.d0() * k,
    )
    .unwrap()
}

/// `P_n f(R)* f(R) P_n` with `f(R)` truncated to words of length `<= trunc`,
/// built from the columns `f(R) e_α = Σ_u f_u e_{α uᵗ}` for `|α| <= n`.
pub fn fock_gram_block(f: &FreeSeries, trunc: usize, n: usize) -> CMat {
    use ncfr::freecore::{num_words, word_at, word_index};
    let d = f.d();
    let rows = num_words(d, trunc).unwrap();
    let k = num_words(d, n).unwrap();
    let mut cols = CMat::zeros(rows, k);
    for a in 0..k {
        let alpha = word_at(a, d);
        for u in 0..num_words(d, trunc - alpha.len()).unwrap() {
            let uw = word_at(u, d);
            if uw.len() > f.order() {
                break;
            }
            let gamma = alpha.concat(&uw.reverse());
            cols[(word_index(&gamma, d), a)] += f.at(u);
        }
    }
    cols.adjoint() * cols
}
