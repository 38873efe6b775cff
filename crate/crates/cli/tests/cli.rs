use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ms-stability"))
}

fn write_config(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: stdout {} stderr {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn strip(a: f64, b: f64) -> String {
    format!(r#"{{"geometry": {{"kind": "strip", "a": {a}, "b": {b}}}, "grid": {{"nx": 32, "ny": 32}}}}"#)
}

#[test]
fn analyze_flat_strip_is_stable() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &strip(1.0, 1.0));
    let out = run(&["analyze"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "strictly_stable");
    let l = v["lambda1"]["value"].as_f64().unwrap();
    assert!((l - 0.636_615_332).abs() < 0.02 * 0.6366, "{l}");
    assert_eq!(v["lambda1"]["provenance"], "numeric");
    assert_eq!(v["lambda1_analytic"]["provenance"], "analytic");
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly_stable"));
}

#[test]
fn analyze_wide_strip_is_unstable() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &strip(1.0, 2.0));
    let out = run(&["analyze"], &cfg);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout_json(&out)["verdict"], "unstable");
}

#[test]
fn analyze_near_threshold_is_marginal() {
    // (2b/π)·tanh(2π/b) = 1 near b = 1.5718
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &strip(1.0, 1.5718));
    let out = run(&["analyze"], &cfg);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(stdout_json(&out)["verdict"], "marginal");
}

#[test]
fn analyze_segments() {
    let dir = TempDir::new().unwrap();
    for (h, code, verdict) in [(1.0, 3, "unstable"), (-1.0, 0, "strictly_stable")] {
        let cfg = write_config(
            &dir,
            "s.json",
            &format!(
                r#"{{"geometry": {{"kind": "segment", "length": 1, "h1": {h}, "h2": {h}}}, "grid": {{"nx": 33, "ny": 16}}, "eigen": {{"mu": true, "restriction": "endpoint_zero"}}}}"#
            ),
        );
        let out = run(&["analyze"], &cfg);
        assert_eq!(out.status.code(), Some(code));
        let v = stdout_json(&out);
        assert_eq!(v["verdict"], verdict);
        assert_eq!(v["mu"]["value"], "inf");
    }
}

#[test]
fn analyze_with_mu() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"geometry": {"kind": "strip", "a": 1, "b": 1}, "grid": {"nx": 32, "ny": 32}, "eigen": {"mu": true, "tolerance": 1e-10, "max_iterations": 1000}}"#,
    );
    let out = run(&["analyze", "--restriction", "endpoint_zero"], &cfg);
    let v = stdout_json(&out);
    let l = v["lambda1"]["value"].as_f64().unwrap();
    let m = v["mu"]["value"].as_f64().unwrap();
    assert!((l * m - 1.0).abs() < 1e-6, "{l} {m}");
    assert_eq!(v["restriction"], "endpoint_zero");
}

const LATTICE: &str = r#"{"geometry": {"kind": "strip", "a": 1, "b": 1,
    "lattice": {"a": [0.5, 1.0], "b": [1.0, 2.0]}}, "grid": {"nx": 32, "ny": 32}}"#;

#[test]
fn phase_diagram_rows_and_determinism() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "l.json", LATTICE);
    let one = run(&["phase-diagram", "--jobs", "1"], &cfg);
    let four = run(&["phase-diagram", "--jobs", "4"], &cfg);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "a,b,lambda1_numeric,lambda1_analytic,verdict,grid_nx,grid_ny,residual");
    assert_eq!(lines.len(), 5);
    let expected = [("0.500000000", "1.00000000", "strictly_stable"), ("0.500000000", "2.00000000", "unstable"),
        ("1.00000000", "1.00000000", "strictly_stable"), ("1.00000000", "2.00000000", "unstable")];
    for (line, (a, b, verdict)) in lines[1..].iter().zip(expected) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!((f[0], f[1], f[4]), (a, b, verdict), "{line}");
        assert_eq!((f[5], f[6]), ("32", "32"));
    }
}

#[test]
fn phase_diagram_empty_lattice_and_out_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "e.json",
        r#"{"geometry": {"kind": "strip", "a": 1, "b": 1, "lattice": {"a": [], "b": [1.0]}}}"#,
    );
    let target = dir.path().join("out.csv");
    let out = run(&["phase-diagram", "--out", target.to_str().unwrap()], &cfg);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(
        std::fs::read_to_string(target).unwrap(),
        "a,b,lambda1_numeric,lambda1_analytic,verdict,grid_nx,grid_ny,residual\n"
    );
}

#[test]
fn grid_override_applies() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "l.json", LATTICE);
    let out = run(&["phase-diagram", "--grid", "16,20"], &cfg);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(&format!(",16,20,{}", l.rsplit(',').next().unwrap()))));
}

#[test]
fn validate_passes_and_fails_on_tolerance() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "v.json", &strip(1.0, 1.0));
    let out = run(&["validate"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = stdout_json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["second_derivative"]["provenance"], "fd");

    let strict = write_config(
        &dir,
        "v2.json",
        r#"{"geometry": {"kind": "strip", "a": 1, "b": 1}, "grid": {"nx": 32, "ny": 32}, "validate": {"second_tolerance": 1e-9}}"#,
    );
    let out = run(&["validate"], &strict);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["passed"], false);
}

#[test]
fn validate_translation_flow() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "t.json",
        r#"{"geometry": {"kind": "strip", "a": 1, "b": 1}, "grid": {"nx": 32, "ny": 32},
            "validate": {"direction": {"offset": 1.0}}}"#,
    );
    let out = run(&["validate"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = stdout_json(&out);
    assert!(v["second_variation"]["value"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn compare_modes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        r#"{"geometry": {"kind": "strip", "a": 1, "b": 1}, "grid": {"nx": 64, "ny": 64}}"#,
    );
    let out = run(&["compare"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = stdout_json(&out);
    let modes = v["modes"].as_array().unwrap();
    assert_eq!(modes.len(), 3);
    for m in modes {
        assert!(m["relative_error"].as_f64().unwrap() <= 0.02);
        assert!(m["observed_order"].as_f64().unwrap() >= 1.8);
    }

    let odd = write_config(
        &dir,
        "o.json",
        r#"{"geometry": {"kind": "strip", "a": 1, "b": 1}, "grid": {"nx": 32, "ny": 32}, "validate": {"modes": [3]}}"#,
    );
    let out = run(&["compare"], &odd);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("odd"));
}

#[test]
fn oracle_values() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &strip(1.0, 2.0));
    let out = run(&["oracle"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["lambda1"]["value"].as_f64().unwrap() - 1.268_493_004_759_663).abs() < 1e-12);
    assert_eq!(v["verdict"], "unstable");

    let seg = write_config(
        &dir,
        "s.json",
        r#"{"geometry": {"kind": "segment", "length": 1, "h1": 0.25, "h2": 0.5}, "grid": {"nx": 64, "ny": 16}}"#,
    );
    let v = stdout_json(&run(&["oracle"], &seg));
    assert_eq!(v["second_variation_constant"]["value"], -0.75);
}

#[test]
fn bad_configs_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "bad.json",
        r#"{"geometry": {"kind": "strip", "a": 1, "b": 1}, "solver": {"tolerence": 1e-8}}"#,
    );
    let out = run(&["analyze"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tolerence") && err.contains("solver"), "{err}");

    let missing = bin().arg("analyze").output().unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let neg = write_config(&dir, "neg.json", &strip(-1.0, 1.0));
    let out = run(&["analyze"], &neg);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("half_height"));
}

#[test]
fn seed_env_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.json", &strip(0.5, 1.0));
    let a = bin().args(["analyze", "--config"]).arg(&cfg).env("MS_STABILITY_SEED", "1").output().unwrap();
    let b = bin().args(["analyze", "--config"]).arg(&cfg).env("MS_STABILITY_SEED", "1").output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    let c = bin().args(["analyze", "--config"]).arg(&cfg).env("MS_STABILITY_SEED", "77").output().unwrap();
    let la = stdout_json(&a)["lambda1"]["value"].as_f64().unwrap();
    let lc = stdout_json(&c)["lambda1"]["value"].as_f64().unwrap();
    assert!((la - lc).abs() < 1e-6 * la);
}
