mod common;

use common::*;
use ncfr::kernels::*;
use ncfr::linalg::{self, CMat, CVec};
use ncfr::realize::RANK_TOL;
use ncfr::{FMRealization, MatrixTuple, NcError};

fn scalar(v: f64) -> MatrixTuple {
    MatrixTuple::scalars(&[r(v)]).unwrap()
}

#[test]
fn stein_examples() {
    let mut g = rng(10);
    let zero = MatrixTuple::zeros(2, 3);
    let p = linalg::hermitian_part(&CMat::from_fn(3, 3, |i, j| cz(i as f64 + 1.0, j as f64)));
    assert_mat_close(&stein(&zero, &zero, &p).unwrap(), &p, 1e-15, "Z = W = 0");
    let q = stein(&scalar(0.5), &scalar(0.5), &CMat::from_element(1, 1, r(1.0))).unwrap();
    assert_close(q[(0, 0)], r(4.0 / 3.0), 1e-14, "geometric");
    let z = MatrixTuple::random_strict(&mut g, 2, 4, 0.9);
    let q = stein(&z, &z, &CMat::identity(4, 4)).unwrap();
    assert!(linalg::lambda_min(&q) >= 1.0 - 1e-12);
    assert!(linalg::stein_residual(z.mats(), z.mats(), &CMat::identity(4, 4), &q) <= 1e-12);
    let w = MatrixTuple::random_strict(&mut g, 2, 3, 0.7);
    let p = CMat::from_fn(4, 3, |i, j| cz(i as f64, -(j as f64)));
    let q = stein(&z, &w, &p).unwrap();
    assert!(linalg::stein_residual(z.mats(), w.mats(), &p, &q) <= 1e-12);
    let big = MatrixTuple::scalars(&[r(1.0), r(0.5)]).unwrap();
    assert!(matches!(stein(&big, &big, &CMat::identity(1, 1)), Err(NcError::NotContractive(_))));
}

#[test]
fn stein_large_iterative_path() {
    let mut g = rng(11);
    let z = MatrixTuple::random_strict(&mut g, 2, 40, 0.6);
    let p = CMat::identity(40, 40);
    let q = stein(&z, &z, &p).unwrap();
    assert!(linalg::stein_residual(z.mats(), z.mats(), &p, &q) <= 1e-12);
}

#[test]
fn kernel_vector_coefficients_match_gram() {
    // ⟨K_p, K_q⟩ from the Stein solve equals the coefficient sum
    let mut g = rng(12);
    let z = MatrixTuple::random_strict(&mut g, 2, 2, 0.5);
    let w = MatrixTuple::random_strict(&mut g, 2, 3, 0.5);
    let p = KernelPoint::new(z, CVec::from_fn(2, |i, _| cz(1.0, i as f64)), CVec::from_fn(2, |i, _| cz(0.5, -(i as f64)))).unwrap();
    let q = KernelPoint::new(w, CVec::from_fn(3, |i, _| cz(i as f64, 1.0)), CVec::from_fn(3, |_, _| cz(0.3, 0.2))).unwrap();
    let order = 22;
    let (sp, sq) = (p.series(order).unwrap(), q.series(order).unwrap());
    let direct: ncfr::Complex64 = sp.dense().iter().zip(sq.dense()).map(|(a, b)| a.conj() * b).sum();
    assert_close(p.pair_h2(&q).unwrap(), direct, 1e-9, "Szegő Gram");
}

#[test]
fn kernel_rep_examples() {
    let z = expr("z1", 1);
    let k = kernel_rep(&z).unwrap();
    let s = k.series(4).unwrap();
    for (i, e) in [0.0, 1.0, 0.0, 0.0, 0.0].iter().enumerate() {
        assert_close(s.get(&w(&vec![1; i])).unwrap(), r(*e), 1e-12, "b = z");
    }
    let c = FMRealization::constant(2, cz(0.4, 0.1));
    let k = kernel_rep(&c).unwrap();
    assert_eq!(k.n(), 1);
    assert_close(k.coeff(&w(&[])), cz(0.4, 0.1), 1e-14, "constant");
    assert_close(k.coeff(&w(&[2, 1])), r(0.0), 1e-14, "constant");
    let h = expr("0.5 + 0.5*z1", 1);
    let s = kernel_rep(&h).unwrap().series(4).unwrap();
    for (i, e) in [0.5, 0.5, 0.0, 0.0, 0.0].iter().enumerate() {
        assert_close(s.get(&w(&vec![1; i])).unwrap(), r(*e), 1e-12, "(1+z)/2");
    }
}

#[test]
fn kernel_rep_reproduces_transpose() {
    let mut g = rng(13);
    for _ in 0..3 {
        let b = FMRealization::random(&mut g, 2, 3, 0.7);
        let k = kernel_rep(&b).unwrap();
        assert_series_close(&k.series(5).unwrap(), &b.series(5).unwrap().transpose(), 5, 1e-9, "bᵗ coefficients");
        let bt = b.transpose();
        for _ in 0..5 {
            let z = MatrixTuple::random_strict(&mut g, 2, 2, 0.8);
            let probe = KernelPoint::new(z, CVec::from_fn(2, |i, _| cz(1.0, i as f64)), CVec::from_fn(2, |_, _| cz(0.2, 0.7))).unwrap();
            // ⟨K_probe, bᵗ⟩ = y* bᵗ(Z) v
            assert_close(probe.pair_h2(&k).unwrap(), probe.reproduce(&bt).unwrap(), 1e-9, "reproducing");
        }
    }
}

#[test]
fn dbr_pairing_examples() {
    let one = KernelPoint::one(1);
    let zero_b = FMRealization::constant(1, r(0.0));
    let mut g = rng(14);
    let z = MatrixTuple::random_strict(&mut g, 1, 2, 0.6);
    let p = KernelPoint::new(z.clone(), CVec::from_fn(2, |i, _| cz(1.0, i as f64)), CVec::from_fn(2, |_, _| cz(0.5, 0.5))).unwrap();
    let q = p.with_y(CVec::from_fn(2, |i, _| cz(i as f64, 1.0)));
    assert_close(dbr_pairing(&zero_b, &p, &q).unwrap(), p.pair_h2(&q).unwrap(), 1e-13, "b = 0");
    assert_close(dbr_kernel_pairing(&zero_b, &p, &q).unwrap(), p.pair_h2(&q).unwrap(), 1e-13, "b = 0 kernel form");
    assert_close(dbr_pairing(&expr("z1", 1), &one, &one).unwrap(), r(1.0), 1e-12, "b = z");
    assert_close(dbr_pairing(&expr("0.5 + 0.5*z1", 1), &one, &one).unwrap(), r(2.0), 1e-7, "b = (1+z)/2");
}

#[test]
fn dbr_kernel_pairing_is_positive() {
    let mut g = rng(15);
    let b = expr("0.5 + 0.5*z1", 1);
    let z = MatrixTuple::random_strict(&mut g, 1, 3, 0.8);
    let ys: Vec<CVec> = (0..3).map(|k| CVec::from_fn(3, |i, _| cz((i + k) as f64, 1.0))).collect();
    let v = CVec::from_fn(3, |i, _| cz(1.0, i as f64));
    let gram = dbr_kernel_gram(&b, &z, &ys, &v, 1e-10).unwrap();
    assert!(linalg::lambda_min(&gram) >= -1e-10);
    assert!(linalg::max_abs(&(&gram - gram.adjoint())) < 1e-12);
    // K^b at 0: 1 - |b(0)|^2
    let k0 = KernelPoint::one(1);
    assert_close(dbr_kernel_pairing(&b, &k0, &k0).unwrap(), r(0.75), 1e-12, "Kᵇ(0,0)");
    let not_contractive = expr("2*z1", 1);
    assert!(matches!(dbr_kernel_gram(&not_contractive, &scalar(0.9), &[CVec::from_element(1, r(1.0))], &CVec::from_element(1, r(1.0)), 1e-10), Err(NcError::NotContractive(_))));
}

#[test]
fn gram_space_examples() {
    let gs = build_gram_space(&expr("0.5 + 0.5*z1", 1)).unwrap();
    assert_eq!(gs.dim(), 1);
    assert_eq!(gs.basis, vec![w(&[1])]);
    assert!((gs.bb_norm_sq - 0.5).abs() < 1e-12);
    assert!((gs.a0_squared - 0.25).abs() < 1e-12);
    let gs = build_gram_space(&expr("0.5*z1 + 0.5*z2", 2)).unwrap();
    assert!((gs.bb_norm_sq - 0.5).abs() < 1e-12);
    let gs = build_gram_space(&expr("z1", 1)).unwrap();
    assert!((gs.bb_norm_sq - 1.0).abs() < 1e-12);
    assert!(gs.a0_squared <= 1e-12);
    assert!(gs.bt_coords.is_none());
}

#[test]
fn gram_space_invariants_random() {
    let mut g = rng(16);
    for _ in 0..6 {
        let raw = FMRealization::random(&mut g, 2, 3, 0.6);
        let b = raw.scale(r(0.4 / raw.h2_norm_sq().unwrap().sqrt() / 3.0));
        let gs = build_gram_space(&b).unwrap();
        let n = b.minimize(RANK_TOL).n();
        assert!(gs.dim() <= n);
        assert!(linalg::lambda_min(&gs.g) > 0.0);
        assert!(linalg::max_abs(&(&gs.g - gs.g.adjoint())) < 1e-12);
        // a(0)² = 1 − |b(0)|² − ‖**b**‖²
        let lhs = 1.0 - gs.b.d0().norm_sqr() - gs.bb_norm_sq;
        assert!((lhs - gs.a0_squared).abs() < 1e-10);
        // weak purity: the shift compressions form a pure tuple
        assert!(ncfr::realize::cp_radius(&gs.xmat) < 1.0);
    }
}

#[test]
fn gram_space_json_shape() {
    let gs = build_gram_space(&expr("0.5 + 0.5*z1", 1)).unwrap();
    let js = gs.to_json();
    assert_eq!(js["basis"], serde_json::json!([[1]]));
    assert!(js["G"][0][0][0].as_f64().unwrap() > 0.0);
}

#[test]
fn riccati_rejects_barely_non_contractive() {
    // order-10 truncation of I − b(R)*b(R) is still positive, but the Riccati
    // function stays above zero on the whole admissible interval
    let js = serde_json::json!({
        "d": 2, "n": 1,
        "A": [[[[-0.4034250126833319, -0.026656484170736898]]], [[[0.5795749250006236, -0.025111696550218627]]]],
        "B": [[[-0.3072906754430783, 0.18980829344550101]], [[1.2715139469133767, -0.031279531941118176]]],
        "C": [[-0.05590964365084483, -0.19439176730213012]],
        "D": [0.03281491278903858, -0.18169073096511437]
    });
    let b = FMRealization::from_json(&js).unwrap();
    assert!(matches!(riccati_min(&b), Err(NcError::NotContractive(_))));
}
