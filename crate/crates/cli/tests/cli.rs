//! End-to-end checks of the binary: exit codes, output files, determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shadowlab"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("shadowlab-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_demo_config(dir: &Path) -> PathBuf {
    let ham = dir.join("ham.json");
    std::fs::write(
        &ham,
        r#"{ "n": 2, "monomials": [ { "coeff": 1.0, "exps": [2, 0, 0, 1] } ] }"#,
    )
    .unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "experiment = \"demo\"\nn = 2\nk = 1\nhamiltonian = {:?}\n\
             t-grid = [0.01, 0.02, 0.03, 0.04]\nsweep = 50\nsamples = 150000\n\
             cells = [0.02]\ncircle-nodes = 64\n\n[phi]\nkind = \"identity\"\n\n\
             [quadrature]\nscheme = \"monte-carlo\"\nlines = 500\nseed = 3\n",
            ham.to_str().unwrap()
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn linear_writes_reports_and_exits_zero() {
    let dir = tmp_dir("linear");
    let cfg = write_demo_config(&dir);
    let out = dir.join("out");
    let status = bin()
        .args(["linear", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("linear_shadow.json")).unwrap())
            .unwrap();
    assert_eq!(json["equality"], serde_json::Value::Bool(true));
    assert!(json["volume"]["value"].as_f64().unwrap() > 3.14);
    assert!(json["volume"]["tol"].as_f64().unwrap() > 0.0);
    assert!(out.join("linear_sweep.csv").exists());
}

#[test]
fn expansion_outputs_fit_artifacts() {
    let dir = tmp_dir("expansion");
    let cfg = write_demo_config(&dir);
    let out = dir.join("out");
    let status = bin()
        .args(["expansion", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("expansion.json")).unwrap())
            .unwrap();
    // hand value for this Hamiltonian: C = pi/2
    let c = json["c"]["value"].as_f64().unwrap();
    assert!((c - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
    assert_eq!(json["symmetry_flag"], serde_json::Value::Bool(false));
    let fit_csv = std::fs::read_to_string(out.join("fit.csv")).unwrap();
    assert!(fit_csv.lines().count() >= 5);
    let svg = std::fs::read_to_string(out.join("fit.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn identical_configs_give_byte_identical_outputs() {
    let dir = tmp_dir("determinism");
    let cfg = write_demo_config(&dir);
    for out in ["out_a", "out_b"] {
        let status = bin()
            .args(["boundary", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in ["boundary.json", "f_table.csv", "boundary.csv"] {
        let a = std::fs::read(dir.join("out_a").join(file)).unwrap();
        let b = std::fs::read(dir.join("out_b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn selftest_passes_on_fresh_build() {
    let output = bin().arg("selftest").output().unwrap();
    assert!(output.status.success(), "selftest failed: {:?}", output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("wirtinger"));
    assert!(stdout.contains("PASS"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tmp_dir("badcfg");
    // missing file
    let status = bin()
        .args(["linear", "--config"])
        .arg(dir.join("missing.toml"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    // invalid dimensions
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "n = 1\nk = 3\n").unwrap();
    let status = bin()
        .args(["wirtinger", "--config"])
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn numerical_blowup_exits_three() {
    let dir = tmp_dir("blowup");
    let ham = dir.join("blowup.json");
    std::fs::write(
        &ham,
        r#"{ "n": 1, "monomials": [ { "coeff": -1.0, "exps": [2, 1] } ] }"#,
    )
    .unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "n = 1\nk = 1\nhamiltonian = {:?}\nt-grid = [2.0]\n",
            ham.to_str().unwrap()
        ),
    )
    .unwrap();
    let status = bin()
        .args(["flow", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(["--x0", "[1.5, 0.2]"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn loops_analyzes_csv_input() {
    let dir = tmp_dir("loopcsv");
    // unit circle in the first pair, 64 samples
    let mut csv = String::from("theta,x0,x1,x2,x3\n");
    for i in 0..64 {
        let th = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
        csv.push_str(&format!("{th},{},{},0.0,0.0\n", th.cos(), th.sin()));
    }
    let input = dir.join("loop.csv");
    std::fs::write(&input, csv).unwrap();
    let out = dir.join("out");
    let status = bin()
        .args(["loops", "--input"])
        .arg(&input)
        .arg("--out")
        .arg(&out)
        .args(["--n", "2", "--k", "1"])
        .status()
        .unwrap();
    assert!(status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("loops.json")).unwrap()).unwrap();
    let energy = json["single_loop"]["energy"]["value"].as_f64().unwrap();
    let area = json["single_loop"]["area"]["value"].as_f64().unwrap();
    assert!((energy - std::f64::consts::PI).abs() < 1e-9);
    assert!((area - std::f64::consts::PI).abs() < 1e-9);
    assert!(out.join("loop_coeffs.json").exists());
}
