//! Runs the `curvred` binary end to end on small configurations.

use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tempfile::TempDir;

use curvature_reduction::config::ProblemConfig;
use curvature_reduction::reduction;
use curvature_reduction::BubbleParams;

fn run(dir: &Path, config: &Value, args: &[&str]) -> (i32, Value, String) {
    let path = dir.join("problem.json");
    std::fs::write(&path, config.to_string()).unwrap();
    let out: Output = Command::new(env!("CARGO_BIN_EXE_curvred"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap();
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), report, String::from_utf8_lossy(&out.stderr).into_owned())
}

fn linear(n: usize, k: usize, coef: f64) -> Value {
    let mut powers = vec![0; n];
    powers[k] = 1;
    json!([{ "coef": coef, "powers": powers }])
}

#[test]
fn constants_report_embeds_the_resolved_config() {
    let dir = TempDir::new().unwrap();
    let h0 = 6f64.sqrt() / 3.0;
    let (code, report, _) = run(dir.path(), &json!({ "n": 3, "K0": 6.0, "H0": h0 }), &["constants"]);
    assert_eq!(code, 0);
    let r = &report["results"];
    assert!((r["D"].as_f64().unwrap() - 6f64.sqrt() * h0 / 6f64.sqrt()).abs() < 1e-15);
    for key in ["a_n", "b_n", "c_n"] {
        assert!(r[key]["relative_difference"].as_f64().unwrap() < 1e-8, "{key}: {}", r[key]);
    }
    let echoed: ProblemConfig = serde_json::from_value(report["config"].clone()).unwrap();
    assert_eq!(echoed.quadrature.radial_nodes, 128);
    assert!(echoed.scan.is_some());
    assert_eq!(report["command"], "constants");
}

#[test]
fn zero_mean_curvature_gives_zero_b() {
    let dir = TempDir::new().unwrap();
    let (code, report, _) = run(dir.path(), &json!({ "n": 4, "K0": 2.0 }), &["constants"]);
    assert_eq!(code, 0);
    assert_eq!(report["results"]["b_n"]["cubature"].as_f64(), Some(0.0));
    assert_eq!(report["results"]["b_n"]["closed_form"].as_f64(), Some(0.0));
}

#[test]
fn config_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let (code, report, _) = run(dir.path(), &json!({ "n": 2, "K0": 1.0 }), &["constants"]);
    assert_eq!(code, 1);
    assert!(report["error"].as_str().unwrap().contains("n must be at least 3"));
    let (code, _, _) = run(dir.path(), &json!({ "n": 3, "K0": 1.0 }), &["gamma-scan"]);
    assert_eq!(code, 1);
    let missing = Command::new(env!("CARGO_BIN_EXE_curvred"))
        .args(["constants", "--config", "/nonexistent/problem.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    let unknown = Command::new(env!("CARGO_BIN_EXE_curvred")).arg("frobnicate").output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn unconverged_quadrature_exits_2() {
    let dir = TempDir::new().unwrap();
    let tight = json!({ "rel_tol": 1e-15, "abs_tol": 1e-300, "radial_nodes": 16, "angular_nodes": 8, "max_refinements": 2 });
    let (code, report, _) = run(dir.path(), &json!({ "n": 3, "K0": 6.0, "H0": 0.5, "quadrature": tight }), &["constants"]);
    assert_eq!(code, 2);
    assert_eq!(report["exit_code"], 2);
}

#[test]
fn gamma_scan_writes_a_lexicographic_grid_that_round_trips() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("scan.csv");
    let config = json!({
        "n": 3, "K0": 6.0, "H0": 0.4,
        "K_poly": linear(3, 0, 1.0), "H_poly": linear(3, 2, -0.5),
        "kappa": 2.0,
        "scan": { "lambda_range": [0.5, 2.0], "zbar_range": [-1.0, 1.0], "resolution": 3 },
    });
    let (code, report, _) = run(dir.path(), &config, &["gamma-scan", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, 0, "{report}");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,zbar1,zbar2,gamma,interior,boundary,converged"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 27);
    let keys: Vec<Vec<f64>> = rows.iter().map(|r| r[..3].iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    assert!(rows.iter().all(|r| r[6] == "true"));

    let parsed = ProblemConfig::from_json(&config.to_string()).unwrap();
    let (c, f) = (parsed.constants().unwrap(), parsed.fields().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let row = &rows[rng.random_range(0..rows.len())];
        let v: Vec<f64> = row[..4].iter().map(|s| s.parse().unwrap()).collect();
        let p = BubbleParams::new(v[0], v[1..3].to_vec()).unwrap();
        let g = reduction::gamma(&c, &f, &p, &parsed.quadrature).unwrap().value;
        assert!((g - v[3]).abs() <= 1e-12 * g.abs().max(1.0), "{g} vs {}", v[3]);
    }
}

#[test]
fn constant_fields_scan_to_a_constant_column() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("scan.csv");
    let k = json!([{ "coef": 1.3, "powers": [0, 0, 0, 0] }]);
    let config = json!({ "n": 4, "K0": 12.0, "H0": 0.7, "K_poly": k, "kappa": 2.0,
        "scan": { "lambda_range": [0.5, 2.0], "zbar_range": [-1.0, 1.0], "resolution": 2 } });
    let (code, _, _) = run(dir.path(), &config, &["gamma-scan", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    let gammas: Vec<f64> = std::fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(gammas.len(), 16);
    let first = gammas[0];
    assert!(gammas.iter().all(|g| (g - first).abs() <= 1e-8 * first.abs()), "{gammas:?}");
}

#[test]
fn scan_outside_the_box_is_rejected() {
    let dir = TempDir::new().unwrap();
    let config = json!({ "n": 3, "K0": 1.0, "kappa": 2.0,
        "scan": { "lambda_range": [0.1, 2.0], "zbar_range": [-1.0, 1.0], "resolution": 3 } });
    let (code, _, _) = run(dir.path(), &config, &["gamma-scan", "--out", "/dev/null"]);
    assert_eq!(code, 1);
}

#[test]
fn verify_bubble_passes() {
    let dir = TempDir::new().unwrap();
    let (code, report, stderr) = run(dir.path(), &json!({ "n": 5, "K0": 3.0, "H0": -0.2 }), &["verify", "bubble"]);
    assert_eq!(code, 0);
    assert!(stderr.contains("PASS"));
    for check in report["results"]["checks"].as_array().unwrap() {
        assert!(check["metric"].as_f64().unwrap() <= 1e-10);
    }
}

#[test]
fn verify_expansion_with_constant_field_has_zero_slope() {
    let dir = TempDir::new().unwrap();
    let k = json!([{ "coef": 2.0, "powers": [0, 0, 0] }]);
    let (code, report, _) = run(dir.path(), &json!({ "n": 3, "K0": 6.0, "H0": 0.3, "K_poly": k }), &["verify", "expansion"]);
    assert_eq!(code, 0, "{report}");
    for check in report["results"]["checks"].as_array().unwrap() {
        assert_eq!(check["details"]["fitted_slope"].as_f64(), Some(0.0));
    }
}

#[test]
fn verify_limit_reports_minus_a_for_the_height_field() {
    let dir = TempDir::new().unwrap();
    let (code, report, _) = run(dir.path(), &json!({ "n": 3, "K0": 6.0, "H0": 0.5, "K_poly": linear(3, 2, 1.0) }), &["verify", "limit"]);
    let (_, constants, _) = run(dir.path(), &json!({ "n": 3, "K0": 6.0, "H0": 0.5 }), &["constants"]);
    let a = constants["results"]["a_n"]["closed_form"].as_f64().unwrap();
    let checks = report["results"]["checks"].as_array().unwrap();
    for check in checks {
        let limit = check["details"]["limit_value"].as_f64().unwrap();
        assert!((limit + a).abs() <= 1e-12 * a.abs(), "{limit} vs {}", -a);
    }
    let passed = checks.iter().all(|c| c["passed"].as_bool().unwrap());
    assert_eq!(code, if passed { 0 } else { 3 });
}

#[test]
fn failed_verification_exits_3() {
    // Along the pure-lambda ray the deviation decays like 1/t, too slowly at D = 0.
    let dir = TempDir::new().unwrap();
    let (code, report, stderr) = run(dir.path(), &json!({ "n": 3, "K0": 6.0, "K_poly": linear(3, 2, 1.0) }), &["verify", "limit"]);
    assert_eq!(code, 3, "{report}");
    assert!(stderr.contains("FAIL"));
    assert_eq!(report["results"]["passed"], false);
}

fn saddle_field() -> Value {
    json!([{ "coef": 1.0, "powers": [2, 0, 0] }, { "coef": -1.0, "powers": [0, 2, 0] }])
}

#[test]
fn theorem_on_the_saddle_field_tabulates_six_points() {
    let dir = TempDir::new().unwrap();
    let (code, report, _) = run(dir.path(), &json!({ "n": 3, "K0": 6.0, "K_poly": saddle_field() }), &["theorem"]);
    assert_eq!(code, 0);
    let v = &report["results"]["verdict"];
    assert_eq!(v["critical_points"].as_array().unwrap().len(), 6);
    assert_eq!(v["euler_sum"], 2);
    assert_eq!(v["conclusion"], false);
}

#[test]
fn theorem_on_a_zero_field_has_no_guarantee() {
    let dir = TempDir::new().unwrap();
    let (code, report, stderr) = run(dir.path(), &json!({ "n": 3, "K0": 6.0, "H0": 0.4 }), &["theorem"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(report["results"]["verdict"]["conclusion"], false);
}

#[test]
fn theorem_on_an_inward_decreasing_field_predicts_a_location() {
    // K = x1 - |x|^2 has a single maximum on the sphere, at e1, where it decreases outward.
    let dir = TempDir::new().unwrap();
    let k = json!([
        { "coef": 1.0, "powers": [1, 0, 0] },
        { "coef": -1.0, "powers": [2, 0, 0] },
        { "coef": -1.0, "powers": [0, 2, 0] },
        { "coef": -1.0, "powers": [0, 0, 2] },
    ]);
    let (code, report, stderr) = run(dir.path(), &json!({ "n": 3, "K0": 6.0, "H0": 0.2, "K_poly": k }), &["theorem"]);
    assert_eq!(code, 0, "{stderr}");
    let r = &report["results"];
    assert_eq!(r["verdict"]["condition1"], true);
    assert_eq!(r["verdict"]["conclusion"], true);
    let location: Vec<f64> = serde_json::from_value(r["predicted_locations"][0].clone()).unwrap();
    assert!((location[0] - 1.0).abs() < 1e-8, "{location:?}");
}

#[test]
fn too_few_starts_exit_4() {
    let dir = TempDir::new().unwrap();
    let search = json!({ "starts": 1, "grid_points": 64 });
    let (code, report, _) =
        run(dir.path(), &json!({ "n": 3, "K0": 6.0, "K_poly": saddle_field(), "search": search }), &["theorem"]);
    assert_eq!(code, 4, "{report}");
}
