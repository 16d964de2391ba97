use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pulsewave"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str], dir: &Path) -> Value {
    serde_json::from_str(&ok(args, dir)).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const COMB: &str = r#"{"period": 1.0, "alpha": 1.0, "kind": "delta_comb"}"#;

#[test]
fn eigen_reports_the_constant_eigenvalue_and_writes_psi() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "period = 2.0\nalpha = 4.0\nkind = \"constant\"\n");
    let v = json(&["eigen", "c.toml", "--lambda", "0.7", "--method", "fd", "--grid", "256", "--psi-csv", "psi.csv"], dir.path());
    assert!((v["mu"].as_f64().unwrap() + 4.0).abs() < 1e-9);
    assert_eq!(v["ratio_bound_ok"], Value::Bool(true));
    assert_eq!(v["method"], "fd");
    let psi = std::fs::read_to_string(dir.path().join("psi.csv")).unwrap();
    assert_eq!(psi.lines().next(), Some("x,psi"));
    assert_eq!(psi.lines().count(), 257);
}

#[test]
fn speed_in_both_directions_agrees() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "two.json",
        r#"{"period": 1.0, "alpha": 1.0, "kind": "atoms", "atoms": [{"position": 0.3, "mass": 0.7}, {"position": 0.55, "mass": 0.3}]}"#,
    );
    let v = json(&["speed", "two.json", "--direction", "both"], dir.path());
    assert!(v["difference"].as_f64().unwrap() <= 1e-6);
    let c = v["positive"]["c_star"].as_f64().unwrap();
    assert!(c > 2.0 && c < 2.0 * 2f64.sqrt());
    assert_eq!(v["negative"]["direction"], "negative");

    write(dir.path(), "c.json", r#"{"period": 0.5, "alpha": 0.25, "kind": "constant"}"#);
    let v = json(&["speed", "c.json"], dir.path());
    assert!((v["c_star"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert!((v["lambda_star"].as_f64().unwrap() - 0.5).abs() <= 1e-6);
}

#[test]
fn dispersion_writes_one_row_per_lambda() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "comb.json", COMB);
    let csv = ok(&["dispersion", "comb.json", "--from", "-1", "--to", "1", "--points", "5"], dir.path());
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "lambda,mu,residual");
    assert_eq!(rows.len(), 6);
    let mu = |k: usize| rows[k].split(',').nth(1).unwrap().parse::<f64>().unwrap();
    assert!((mu(1) - mu(5)).abs() < 1e-12 && mu(3) < mu(1));
    assert!(!run(&["dispersion", "comb.json", "--points", "1"], dir.path()).status.success());
}

#[test]
fn simulate_writes_front_snapshots_and_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "comb.json", COMB);
    write(dir.path(), "sim.toml", "preset = \"coarse\"\nt_end = 1.0\nsnapshot_interval = 0.25\n");
    ok(
        &["simulate", "comb.json", "--config", "sim.toml", "-o", "front.csv", "--snapshots", "u.bin", "--svg", "u.svg"],
        dir.path(),
    );
    let front = std::fs::read_to_string(dir.path().join("front.csv")).unwrap();
    assert!(front.starts_with("t,x_plus,x_minus\n"));
    let bytes = std::fs::read(dir.path().join("u.bin")).unwrap();
    let (_, _, snaps) = pulsewave::pde::read_snapshots(&bytes).unwrap();
    assert_eq!(snaps.len(), 5);
    let svg = std::fs::read_to_string(dir.path().join("u.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));

    write(dir.path(), "bad.toml", "t_finish = 1.0\n");
    assert!(!run(&["simulate", "comb.json", "--config", "bad.toml"], dir.path()).status.success());
}

#[test]
fn spread_compares_the_fit_with_the_minimal_speed() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "comb.json", COMB);
    let v = json(
        &["spread", "comb.json", "--preset", "coarse", "--half-width-periods", "40", "--t-end", "12"],
        dir.path(),
    );
    for key in ["c_fit", "c_eigen", "rel_err", "lambda_edge"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["rel_err"].as_f64().unwrap() < 0.1);
}

#[test]
fn sweep_is_reproducible_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "plan.toml",
        "family = \"fourier_random\"\nseed = 5\ncount = 4\nsmoothness = 2.0\nalpha = 1.0\nperiod = 1.0\n",
    );
    ok(&["sweep", "plan.toml", "-o", "a.csv", "--svg", "a.svg"], dir.path());
    let stdout = ok(&["sweep", "plan.toml"], dir.path());
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, stdout);
    assert_eq!(a.lines().count(), 5);
    assert!(std::fs::read_to_string(dir.path().join("a.svg")).unwrap().contains("<circle"));
}

#[test]
fn optimal_gap_with_a_convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "comb.json", COMB);
    write(dir.path(), "s.json", r#"{"period": 1.0, "alpha": 1.0, "kind": "shigesada", "fraction": 0.5, "contrast": null}"#);
    let v = json(&["optimal-gap", "s.json"], dir.path());
    assert!(v["gap"].as_f64().unwrap() > 1e-4);
    let v = json(&["optimal-gap", "comb.json", "--widths", "0.2,0.1", "--table", "t.csv"], dir.path());
    assert_eq!(v["gap"].as_f64().unwrap(), 0.0);
    assert_eq!(v["mollified"]["rows"].as_array().unwrap().len(), 2);
    let table = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("width,c_star,gap,direction_defect"));
    assert!(!run(&["optimal-gap", "s.json", "--widths", "0.1"], dir.path()).status.success());
}

#[test]
fn missing_files_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["speed", "absent.json"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
}
