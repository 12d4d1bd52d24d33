use std::fs;
use std::process::{Command, Output};

use heatwalk::solver::{solve, Method, SolveRequest};
use heatwalk::walk::return_table;
use heatwalk::{Datum, ModelParams};
use num_complex::Complex64;

fn heatwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatwalk")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows of a CSV with `#` comments, header dropped.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn cos_datum(dir: &tempfile::TempDir) -> String {
    let path = dir.path().join("cos.csv");
    Datum::cosine(1.0).write_csv(fs::File::create(&path).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn returns_match_library() {
    let out = stdout(&heatwalk(&["returns", "--order", "3", "--m-max", "4"]));
    let params = ModelParams::real(3, 1.0).unwrap();
    let (_, table) = return_table(&params, 4).unwrap();
    let rows = rows(&out);
    assert_eq!(rows.len(), table.len());
    for (row, expected) in rows.iter().zip(&table) {
        assert_eq!(row[0], expected.n.to_string());
        assert_eq!(row[1], expected.paths.to_string());
        assert_eq!(row[2], expected.total.to_string());
    }
    assert_eq!(&rows[0][..3], ["3", "6", "27"]);
    assert_eq!(&rows[1][..3], ["6", "90", "729"]);
}

#[test]
fn order_below_two_is_a_usage_error() {
    let out = heatwalk(&["moments", "--order", "1", "--n", "3", "--k-max", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N >= 2"));
}

#[test]
fn odd_order_dirichlet_is_refused() {
    let out = heatwalk(&["boundary", "--order", "3", "--sine", "1", "--L", "3", "--t", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = heatwalk(&["boundary", "--order", "3", "--bc", "periodic", "--L", "6.283185307179586", "--t", "0.5"]);
    assert_eq!(out.status.code(), Some(2), "missing datum is a usage error");
}

#[test]
fn missing_datum_file_is_a_usage_error() {
    let out = heatwalk(&["solve", "--order", "4", "--datum", "/nonexistent/datum.csv", "--t", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_agrees_with_library_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let datum = cos_datum(&dir);
    let out = stdout(&heatwalk(&["solve", "--order", "4", "--datum", &datum, "--t", "1", "--x", "0,1", "--n", "10000"]));
    let params = ModelParams::real(4, 1.0).unwrap();
    let req = SolveRequest::new(params, Datum::cosine(1.0), 1.0, vec![0.0, 1.0], 10_000, Method::WalkExact);
    let lib = solve(&req).unwrap();
    let rows = rows(&out);
    for (row, expected) in rows.iter().zip(&lib.rows) {
        let un_re: f64 = row[3].parse().unwrap();
        assert_eq!(un_re, expected.un.re);
    }
    // ∂⁴cos = cos, so u = e^{t/24} cos x
    let un0: f64 = rows[0][3].parse().unwrap();
    let bound = 1.1 * heatwalk::solver::error_bound_c(&params, &Datum::cosine(1.0), 1.0).unwrap() / 1e4;
    assert!((un0 - (1.0f64 / 24.0).exp()).abs() <= bound);
}

#[test]
fn monte_carlo_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let datum = cos_datum(&dir);
    let args = [
        "solve", "--order", "2", "--datum", &datum, "--t", "1", "--x", "0,0.5", "--n", "400", "--method", "walk-mc",
        "--replicas", "3000", "--seed", "11",
    ];
    let a = stdout(&heatwalk(&args));
    let b = stdout(&heatwalk(&args));
    assert_eq!(a, b);
    assert!(a.contains("# seed: 11"));
    let mut with_workers = args.to_vec();
    with_workers.extend(["--workers", "1"]);
    let c = stdout(&heatwalk(&with_workers));
    assert_eq!(rows(&a), rows(&c), "the worker count must not change the numbers");
}

#[test]
fn json_output_parses() {
    let out = stdout(&heatwalk(&["clt", "check", "--order", "3", "--n-grid", "10,100", "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let scaled = rows[1]["n_times_err_abs"].as_f64().unwrap();
    assert!((scaled - 0.0125).abs() < 1e-5);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(&path, r#"{"order": 4, "m_max": 3}"#).unwrap();
    let cfg = path.to_str().unwrap();
    let from_file = rows(&stdout(&heatwalk(&["walk", "returns", "--config", cfg])));
    assert_eq!(from_file.last().unwrap()[0], "12");
    let overridden = rows(&stdout(&heatwalk(&["walk", "returns", "--config", cfg, "--m-max", "1"])));
    assert_eq!(overridden.last().unwrap()[0], "4");
}

#[test]
fn output_file_and_sample_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("paths.csv");
    let p = path.to_str().unwrap();
    let out = heatwalk(&["walk", "sample", "--order", "5", "--n", "6", "--replicas", "3", "--seed", "2", "--out", p]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(&path).unwrap();
    let rows = rows(&text);
    assert_eq!(rows.len(), 3 * 7);
    // unscaled steps are unit roots: every increment has modulus one
    for w in rows.windows(2).filter(|w| w[0][0] == w[1][0]) {
        let a = Complex64::new(w[0][2].parse().unwrap(), w[0][3].parse().unwrap());
        let b = Complex64::new(w[1][2].parse().unwrap(), w[1][3].parse().unwrap());
        assert!(((b - a).norm() - 1.0).abs() < 1e-9);
    }
}
