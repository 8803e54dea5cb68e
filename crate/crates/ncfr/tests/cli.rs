mod common;

use std::path::PathBuf;
use std::process::{Command, Output};

use common::*;
use ncfr::fejerriesz::NCMeasureMoments;
use ncfr::ncparse::{eval_direct, parse};
use ncfr::{FMRealization, FreeSeries, MatrixTuple};
use serde_json::Value;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn ncfr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncfr")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("cli-{name}"))
}

#[test]
fn classify_golden() {
    let out = ncfr(&["classify", "-d", "1", "-e", "0.5 + 0.5*z1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "NonCE");
    assert!((v["a0_squared"].as_f64().unwrap() - 0.25).abs() < 1e-8);
}

#[test]
fn classify_not_contractive_exits_2() {
    let out = ncfr(&["classify", "-e", "2*z1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["verdict"], "NotContractive");
}

#[test]
fn factor_golden() {
    let out = ncfr(&["factor", "-d", "1", "-e", "1 + z1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let f = FMRealization::from_json(&v["factor"]).unwrap();
    let c = coeffs_1d(&f, 3);
    for (k, want) in [SQRT_HALF, SQRT_HALF, 0.0, 0.0].into_iter().enumerate() {
        assert_close(c[k], r(want), 1e-7, "factor coefficient");
    }
    let rep = &v["report"];
    assert_eq!(rep["pass"], true);
    assert!(rep["coefficient_defect"].as_f64().unwrap() < 1e-8);
    assert_eq!(rep["order"], 8);
    assert!(v["sizes"]["factor_dim"].as_u64().unwrap() <= 2 * v["sizes"]["herglotz_dim"].as_u64().unwrap());
}

#[test]
fn factor_square_input() {
    let out = ncfr(&["factor", "--square", "-e", "(1 - z1)*0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let f = FMRealization::from_json(&stdout_json(&out)["factor"]).unwrap();
    let c = coeffs_1d(&f, 2);
    // r(R)*r(R) = d(R)*d(R) with d outer and d(0) > 0
    assert_close(c[0], r(0.5), 1e-7, "d(0)");
    assert_close(c[1], r(-0.5), 1e-7, "d_1");
}

#[test]
fn entropy_identity_symbol() {
    let out = ncfr(&["entropy", "-d", "2", "-e", "1", "-N", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let table = v["table"].as_array().unwrap();
    assert_eq!(table.len(), 4);
    for (i, row) in table.iter().enumerate() {
        assert_eq!(row["n"], i + 1);
        assert!((row["eps"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn entropy_of_defect_decreases_to_a0_squared() {
    let out = ncfr(&["entropy", "--defect", "-e", "(z1 + z2)*0.5", "-N", "3"]);
    let v = stdout_json(&out);
    for row in v["table"].as_array().unwrap() {
        assert!((row["eps"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn parse_round_trips() {
    let text = "(1 - 0.5*z1*z2)^-1 * (z2 + 0.25i)";
    let out = ncfr(&["parse", "-e", text]);
    assert_eq!(out.status.code(), Some(0));
    let r = FMRealization::from_json(&stdout_json(&out)).unwrap();
    assert_eq!(r.d(), 2);
    assert_series_close(&r.series(5).unwrap(), &expr(text, 2).series(5).unwrap(), 5, 1e-13, "parse");
}

#[test]
fn eval_matches_direct_evaluation() {
    let text = "(1 - 0.5*z1)^-1 * z2 - z1*z2";
    let mut g = rng(31);
    let z = MatrixTuple::random_strict(&mut g, 2, 3, 0.8);
    let point = tmp("point.json");
    std::fs::write(&point, z.to_json().to_string()).unwrap();
    let out = ncfr(&["eval", "-e", text, "--point", point.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let want = eval_direct(&parse(text, 2).unwrap(), &z).unwrap();
    let rows = v["value"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        for (j, x) in row.as_array().unwrap().iter().enumerate() {
            let got = cz(x[0].as_f64().unwrap(), x[1].as_f64().unwrap());
            assert_close(got, want[(i, j)], 1e-10, "eval entry");
        }
    }
    let back = MatrixTuple::from_json(&v["point"]).unwrap();
    assert_eq!(back.mats(), z.mats());
}

#[test]
fn eval_random_point_is_seeded() {
    let a = ncfr(&["eval", "-e", "z1*z2", "--size", "2", "--seed", "7"]);
    let b = ncfr(&["eval", "-e", "z1*z2", "--size", "2", "--seed", "7"]);
    let c = ncfr(&["eval", "-e", "z1*z2", "--size", "2", "--seed", "8"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn coeffs_and_minimize() {
    let out = ncfr(&["coeffs", "-e", "z1*z2 + 0.5", "-N", "3"]);
    let s = FreeSeries::from_json(&stdout_json(&out)).unwrap();
    assert_eq!(s.order(), 3);
    assert_close(s.get(&w(&[1, 2])).unwrap(), r(1.0), 0.0, "z1 z2");
    assert_close(s.get(&w(&[])).unwrap(), r(0.5), 0.0, "constant");
    assert_close(s.get(&w(&[2, 1])).unwrap(), r(0.0), 0.0, "z2 z1");

    let out = ncfr(&["minimize", "-e", "z1 + z1 - z1"]);
    let m = FMRealization::from_json(&stdout_json(&out)).unwrap();
    assert_eq!(m.n(), 1);
}

#[test]
fn sarason_reports_and_realization() {
    let out = ncfr(&["sarason", "-e", "(z1 + z2)*0.5", "-N", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let a = FMRealization::from_json(&v["a"]).unwrap();
    assert_close(a.d0(), r(SQRT_HALF), 1e-8, "a(0)");
    assert_eq!(v["report"]["pass"], true);

    let out = ncfr(&["sarason", "-e", "z1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "InnerSymbol");
}

#[test]
fn clark_moments_carry_measure_flag() {
    let out = ncfr(&["clark", "-e", "0.5*z1", "-N", "3"]);
    let v = stdout_json(&out);
    assert_eq!(v["measure"], true);
    let m = NCMeasureMoments::from_json(&v).unwrap();
    // (1 + b)(1 − b)⁻¹ = 1 + 2 Σ_k (z/2)^k, so μ(L^k) = 2^-k
    for k in 0..=3usize {
        assert_close(m.get(&w(&vec![1; k])).unwrap(), r(0.5f64.powi(k as i32)), 1e-14, "moment");
    }
}

#[test]
fn verify_pass_fail_and_file_input() {
    let out = ncfr(&["verify", "-e", "(1 + z1)*0.5 ; (1 - z1)*0.5", "-N", "4", "--tol", "1e-10"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["pass"], true);

    let out = ncfr(&["verify", "-e", "0.5*z1 ; 0.5*z1", "-N", "4"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], false);
    for key in ["colligation_defect_iso", "colligation_defect_coiso", "coefficient_defect", "order", "pass"] {
        assert!(v.get(key).is_some(), "report field {key}");
    }

    let pair = serde_json::json!({
        "b": expr("(z1 + z2)*0.5", 2).to_json(),
        "a": expr("0.7071067811865476", 2).to_json(),
    });
    let path = tmp("pair.json");
    std::fs::write(&path, pair.to_string()).unwrap();
    let out = ncfr(&["verify", "-f", path.to_str().unwrap(), "-N", "4"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn realization_file_and_output_path() {
    let path = tmp("b.json");
    std::fs::write(&path, expr("0.5 + 0.5*z1", 1).to_json().to_string()).unwrap();
    let dest = tmp("classification.json");
    let _ = std::fs::remove_file(&dest);
    let out = ncfr(&["classify", "-f", path.to_str().unwrap(), "-o", dest.to_str().unwrap(), "--pretty"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&dest).unwrap();
    assert!(text.contains('\n'));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["verdict"], "NonCE");

    let out = ncfr(&["classify", "-d", "2", "-f", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "DimensionMismatch");
}

#[test]
fn input_errors_are_structured() {
    let out = ncfr(&["parse", "-e", "1 + * z1"]);
    assert_eq!(out.status.code(), Some(1));
    let e = stderr_json(&out);
    assert_eq!(e["error"], "SyntaxError");
    assert_eq!(e["location"], 4);
    assert!(e["detail"].as_str().unwrap().contains("syntax"));

    let out = ncfr(&["verify", "-d", "2", "-e", "z1 ; 0.3 + z4"]);
    let e = stderr_json(&out);
    assert_eq!(e["error"], "UnknownVariable");
    assert_eq!(e["location"], 11);

    let out = ncfr(&["classify", "-e", "z1", "-f", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "Usage");

    let out = ncfr(&["classify"]);
    assert_eq!(out.status.code(), Some(1));

    let out = ncfr(&["factor", "-e", "-1 + z1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "SingularAtZero");

    let out = ncfr(&["classify", "-e", "z1", "--tol", "-1"]);
    assert_eq!(stderr_json(&out)["error"], "InvalidInput");
}

#[test]
fn output_is_deterministic() {
    let args = ["factor", "-e", "1 + (z1 + z2)*0.7071067811865476", "-N", "4"];
    let a = ncfr(&args);
    let b = ncfr(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn help_exits_cleanly() {
    let out = ncfr(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["parse", "eval", "coeffs", "minimize", "classify", "sarason", "factor", "entropy", "clark", "verify"] {
        assert!(text.contains(cmd), "help lists {cmd}");
    }
}
