mod common;

use common::*;
use ncfr::focktrunc::{defect_symbol, entropy_schur, realization_symbol, spectral_factor_1d};
use ncfr::kernels::build_gram_space;
use ncfr::linalg::CVec;
use ncfr::realize::cp_radius;
use ncfr::sarason::*;
use ncfr::{FreeSeries, NcError};
use proptest::prelude::*;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn inner_suite() -> Vec<ncfr::FMRealization> {
    vec![expr("z1", 1), expr("(z1 + z2)*0.7071067811865476", 2), expr("(z1 - 0.5)*(1 - 0.5*z1)^-1", 1)]
}

fn nonce_suite() -> Vec<(ncfr::FMRealization, f64)> {
    vec![
        (expr("(1 + z1)*0.5", 1), 0.25),
        (expr("z1*(2 + z1)^-1", 1), 0.5),
        (expr("(z1 + z2)*0.5", 2), 0.5),
        (expr("0.3 + 0.2*z1 - 0.4*z2*z1", 2), f64::NAN),
    ]
}

#[test]
fn classify_examples() {
    for b in inner_suite() {
        let cl = classify(&b);
        assert_eq!(cl.verdict, Verdict::Inner, "{cl:?}");
        assert!(cl.a0_squared <= 1e-10);
    }
    for (b, a0) in nonce_suite() {
        let cl = classify(&b);
        assert_eq!(cl.verdict, Verdict::NonCE, "{cl:?}");
        if a0.is_finite() {
            // z/(2+z) has a boundary zero of 1 − |b|², which costs about half the digits
            assert!((cl.a0_squared - a0).abs() <= 1e-8, "{} vs {a0}", cl.a0_squared);
        }
        assert!(cl.evidence.precheck_order > 0 && cl.evidence.cp_radius < 1.0);
    }
}

#[test]
fn classify_rejects_non_contractive() {
    for (text, d) in [("2*z1", 1), ("0.9*z1 + 0.9*z2", 2), ("1.2", 1), ("0.6 + 0.6*z1", 1)] {
        let cl = classify(&expr(text, d));
        assert_eq!(cl.verdict, Verdict::NotContractive, "{text}: {cl:?}");
        assert!(cl.evidence.detail.is_some());
    }
    let cl = classify(&expr("2*z1", 1));
    assert!((cl.evidence.precheck_min_eig.unwrap() + 3.0).abs() < 1e-12);
    assert!(matches!(sarason(&expr("2*z1", 1)), Err(NcError::NotContractive(_))));
}

#[test]
fn classify_indeterminate_band() {
    // b = cz has a(0)² = 1 − |c|²
    for (gap, verdict) in [(5e-9f64, Verdict::Indeterminate), (1e-12, Verdict::Inner), (1e-6, Verdict::NonCE)] {
        let b = ncfr::FMRealization::variable(1, 1).scale(r((1.0 - gap).sqrt()));
        let cl = classify(&b);
        assert_eq!(cl.verdict, verdict, "gap {gap}: {cl:?}");
        assert!((cl.a0_squared - gap).abs() <= 1e-12);
    }
    let b = ncfr::FMRealization::variable(1, 1).scale(r((1.0 - 5e-9f64).sqrt()));
    assert!(matches!(sarason(&b), Err(NcError::Indeterminate(_))));
}

#[test]
fn a0_squared_examples() {
    assert!((a0_squared(&expr("(1 + z1)*0.5", 1)).unwrap() - 0.25).abs() <= 1e-8);
    assert!((a0_squared(&expr("(z1 + z2)*0.5", 2)).unwrap() - 0.5).abs() <= 1e-8);
    for b in inner_suite() {
        assert!(a0_squared(&b).unwrap() <= 1e-10);
    }
    assert!((a0_squared(&expr("0.4", 1)).unwrap() - 0.84).abs() <= 1e-14);
}

#[test]
fn sarason_examples() {
    let a = sarason(&expr("(1 + z1)*0.5", 1)).unwrap();
    let c = coeffs_1d(&a, 6);
    assert_close(c[0], r(0.5), 1e-8, "a0");
    assert_close(c[1], r(-0.5), 1e-8, "a1");
    assert!(c[2..].iter().all(|x| x.norm() <= 1e-8));

    let a = sarason(&expr("(z1 + z2)*0.5", 2)).unwrap();
    assert_eq!(a.n(), 0);
    assert_close(a.d0(), r(SQRT_HALF), 1e-8, "constant mate");

    // √2(1+z)/(2+z)
    let a = sarason(&expr("z1*(2 + z1)^-1", 1)).unwrap();
    let want = coeffs_1d(&expr("1.4142135623730951*(1 + z1)*(2 + z1)^-1", 1), 8);
    let got = coeffs_1d(&a, 8);
    for (k, (x, y)) in got.iter().zip(&want).enumerate() {
        assert_close(*x, *y, 1e-8, &format!("coefficient {k}"));
    }
    assert!(a.n() <= 1);

    for b in inner_suite() {
        assert_eq!(sarason(&b), Err(NcError::InnerSymbol));
    }
}

#[test]
fn sarason_matches_classical_spectral_factor() {
    // 1 − |b|² bounded away from zero, so the Cholesky oracle converges geometrically
    let n = 40;
    for text in ["(1 + z1)*0.3333333333333333", "0.2 + 0.5*z1*(1 - 0.3*z1)^-1", "0.1 - 0.4*z1 + 0.3*z1*z1"] {
        let b = expr(text, 1);
        let bs = b.series(4 * n).unwrap();
        let energy: f64 = (0..=4 * n).map(|k| bs.level_energy(k)).sum();
        let t = defect_symbol(&bs, n, energy).unwrap().t;
        let f = spectral_factor_1d(&t, n).unwrap();
        let a = coeffs_1d(&sarason(&b).unwrap(), n);
        for k in 0..=10 {
            assert_close(a[k], f.at(k), 1e-8, &format!("{text} coefficient {k}"));
        }
    }
}

#[test]
fn sarason_is_maximal_minorant() {
    // entropy of I − b*b decreases to a(0)² and stays above it
    for text in ["(1 + z1)*0.3333333333333333", "0.2 + 0.5*z1*(1 - 0.3*z1)^-1"] {
        let b = expr(text, 1);
        let a0 = a0_squared(&b).unwrap();
        let unit = FreeSeries::unit(1, 30).unwrap();
        let t = unit.sub(&realization_symbol(&b, 30).unwrap()).unwrap();
        let mut prev = f64::INFINITY;
        for n in [2, 5, 10, 20, 30] {
            let eps = entropy_schur(&t.truncate(n).unwrap(), n).unwrap().eps;
            assert!(eps <= prev + 1e-14 && eps >= a0 - 1e-12, "{text} N={n}: {eps} vs {a0}");
            prev = eps;
        }
        assert!(prev - a0 <= 1e-8, "{text}: {prev} vs {a0}");
    }
    let b = expr("0.3 + 0.2*z1 - 0.4*z2*z1", 2);
    let a0 = a0_squared(&b).unwrap();
    let t = FreeSeries::unit(2, 6).unwrap().sub(&realization_symbol(&b, 6).unwrap()).unwrap();
    let mut prev = f64::INFINITY;
    for n in 1..=6 {
        let eps = entropy_schur(&t.truncate(n).unwrap(), n).unwrap().eps;
        assert!(eps <= prev + 1e-14 && eps >= a0 - 1e-12, "N={n}: {eps} vs {a0}");
        prev = eps;
    }
    // slower convergence in two letters; the gap at N=6 is about 1.2e-6
    assert!(prev - a0 <= 1e-5, "{prev} vs {a0}");
}

/// `−a(0) ⟨bᵗ, X^ω bᵗ⟩` with the letters of ω applied right to left (`X_{ik}` first)
/// or left to right (`X_{i1}` first).
fn model_coefficients(gs: &ncfr::kernels::GramSpace, order: usize, right_first: bool) -> FreeSeries {
    let bt = gs.bt_coords.clone().unwrap();
    let a0 = gs.a0_squared.sqrt();
    let gw_inv = ncfr::linalg::inverse(&gs.g).unwrap();
    FreeSeries::from_fn(gs.b.d(), order, |w| {
        if w.is_empty() {
            return r(a0);
        }
        let mut letters: Vec<u8> = w.letters().to_vec();
        if !right_first {
            letters.reverse();
        }
        let last = *letters.last().unwrap() as usize - 1;
        // X_j bᵗ has state B_j
        let mut v: CVec = &gw_inv * (gs.basis_states.adjoint() * (&gs.riccati.g * &gs.b.b()[last]));
        for &j in letters[..letters.len() - 1].iter().rev() {
            v = &gs.xmat[j as usize - 1] * v;
        }
        -bt.dotc(&(&gs.g * v)) * a0
    })
    .unwrap()
}

#[test]
fn sarason_coefficients_letter_order() {
    let mut g = rng(11);
    for _ in 0..4 {
        let b = random_contractive(&mut g, 2, 3, 0.5, 0.7);
        let gs = build_gram_space(&b).unwrap();
        let a = sarason(&b).unwrap().series(4).unwrap();
        let model = sarason_coefficients(&gs, 4).unwrap();
        assert_series_close(&model, &a, 4, 1e-9, "model coefficients");
        assert_series_close(&model_coefficients(&gs, 4, true), &a, 4, 1e-9, "right-first product");
        let other = model_coefficients(&gs, 4, false);
        assert!(other.max_abs_diff(&a, 4).unwrap() > 1e-4, "left-first product also matches");
    }
}

#[test]
fn verify_column_examples() {
    let rep = verify_column(&expr("(1 + z1)*0.5", 1), &expr("(1 - z1)*0.5", 1), 4, 1e-10).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert_eq!(rep.order, 4);
    let rep = verify_column(&expr("(z1 + z2)*0.5", 2), &expr("0.7071067811865476", 2), 4, 1e-8).unwrap();
    assert!(rep.pass, "{rep:?}");
    let rep = verify_column(&expr("0.5*z1", 1), &expr("0.5*z1", 1), 4, 1e-8).unwrap();
    assert!(!rep.pass && rep.coefficient_defect > 0.4, "{rep:?}");
    // a correct symbol but a wrong sign still fails
    let rep = verify_column(&expr("(1 + z1)*0.5", 1), &expr("(1 + z1)*0.5", 1), 4, 1e-8).unwrap();
    assert!(!rep.pass, "{rep:?}");

    for (b, _) in nonce_suite() {
        let a = sarason(&b).unwrap();
        let rep = verify_column(&b, &a, 4, 1e-8).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn verify_column_report_json() {
    let rep = verify_column(&expr("(1 + z1)*0.5", 1), &expr("(1 - z1)*0.5", 1), 3, 1e-10).unwrap();
    let v = serde_json::to_value(&rep).unwrap();
    for key in ["colligation_defect_iso", "colligation_defect_coiso", "coefficient_defect", "order", "pass"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let back: ColumnReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, rep);
    let cl = classify(&expr("(1 + z1)*0.5", 1));
    let back: Classification = serde_json::from_str(&serde_json::to_string(&cl).unwrap()).unwrap();
    assert_eq!(back, cl);
}

#[test]
fn structural_identities_hold() {
    for (b, a0) in nonce_suite() {
        let rep = structural_identities(&b).unwrap();
        assert!(rep.rank2_defect <= 1e-8, "{rep:?}");
        assert!(rep.adjx_defect <= 1e-8, "{rep:?}");
        assert!(rep.bt_norm_defect <= 1e-8, "{rep:?}");
        assert!(rep.gram_agreement <= 1e-8, "{rep:?}");
        assert!(rep.iso_defect <= 1e-8 && rep.coiso_defect <= 1e-8, "{rep:?}");
        if a0.is_finite() {
            assert!((rep.a0_squared - a0).abs() <= 1e-8);
        }
    }
    assert_eq!(structural_identities(&expr("z1", 1)), Err(NcError::InnerSymbol));
}

#[test]
fn weak_purity_decays_geometrically() {
    let mut g = rng(5);
    for _ in 0..3 {
        let b = random_contractive(&mut g, 2, 3, 0.6, 0.8);
        let gs = build_gram_space(&b).unwrap();
        let rho = cp_radius(&gs.xmat);
        assert!(rho < 1.0);
        let p = weak_purity_profile(&gs, 60);
        assert!(p.iter().all(|x| *x >= -1e-14));
        let rate = (p[59].max(1e-300) / p[0]).powf(1.0 / 59.0);
        assert!(rate <= rho + 0.05, "rate {rate} vs cp radius {rho}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dichotomy_on_random_contractions(seed in 0u64..1_000_000, d in 1usize..3, n in 1usize..4, inner in any::<bool>()) {
        let mut g = rng(seed);
        let b = random_contractive(&mut g, d, n, 0.5, 0.8);
        let cl = classify(&b);
        prop_assert!(matches!(cl.verdict, Verdict::Inner | Verdict::NonCE), "{:?}", cl);
        prop_assert_eq!(cl.verdict, Verdict::NonCE);
        let a = sarason(&b).unwrap();
        prop_assert!(a.d0().re > 0.0 && a.d0().im.abs() < 1e-12);
        prop_assert!(a.n() <= b.minimize(1e-10).n());
        prop_assert!((a.d0().re.powi(2) - cl.a0_squared).abs() < 1e-10);
        if inner {
            // a column (b; a) is inner, so its Fock symbol is the identity
            let sb = realization_symbol(&b, 3).unwrap();
            let sa = realization_symbol(&a, 3).unwrap();
            let one = FreeSeries::unit(d, 3).unwrap();
            prop_assert!(sb.add(&sa).unwrap().max_abs_diff(&one, 3).unwrap() < 1e-9);
        }
    }
}
