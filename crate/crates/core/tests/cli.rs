use std::fs;
use std::path::Path;

use qlap_core::cli::{run, RunConfig, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VANISHING};

fn qlap(out: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["qlap".to_string(), "--out".into(), out.display().to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    run(full)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn regime_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(qlap(out, &["regime", "--N", "5", "--q", "4", "--p", "4"]), EXIT_OK);
    assert_eq!(qlap(out, &["regime", "--N", "1", "--q", "2", "--p", "4.5"]), EXIT_USAGE);
    assert_eq!(qlap(out, &["regime", "--q", "3", "--p", "4.5"]), EXIT_USAGE);
    assert_eq!(qlap(out, &["regime", "--N", "1", "--q", "3", "--p", "4.5", "--bogus"]), EXIT_USAGE);
    assert_eq!(qlap(out, &["alpha0", "--N", "1", "--q", "3", "--p", "4.5", "--m", "1"]), EXIT_USAGE);
}

#[test]
fn shoot_is_deterministic_and_echoes_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["shoot", "--N", "3", "--q", "3", "--p", "4", "--lambda", "1", "--u0", "1.3", "--r-max", "15"];
    assert_eq!(qlap(a.path(), &args), EXIT_OK);
    assert_eq!(qlap(b.path(), &args), EXIT_OK);
    for name in ["shoot.json", "trajectory.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs between runs");
    }
    let echo = RunConfig::parse(&read(a.path(), "config.toml")).unwrap();
    let mut other = RunConfig::parse(&read(b.path(), "config.toml")).unwrap();
    other.output_dir = echo.output_dir.clone();
    assert_eq!(echo, other);
    assert_eq!(echo.shoot.u0, 1.3);
    assert_eq!(echo.shoot.r_max, 15.0);
    assert_eq!(echo.params.dim, Some(3));
    assert_eq!(echo.output_dir, a.path());
    let json: serde_json::Value = serde_json::from_str(&read(a.path(), "shoot.json")).unwrap();
    assert_eq!(json["result"]["u0"], 1.3);
    assert!(read(a.path(), "trajectory.csv").starts_with("r,u,du,F\n"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, "format = \"csv\"\n[params]\nN = 1\nq = 3.0\np = 4.5\n[shoot]\nlambda = 1.0\nu0 = 0.7\nr_max = 10.0\n").unwrap();
    let out = dir.path().join("out");
    let code = qlap(&out, &["--config", cfg_path.to_str().unwrap(), "shoot", "--u0", "2.5"]);
    assert_eq!(code, EXIT_OK);
    let echo = RunConfig::parse(&read(&out, "config.toml")).unwrap();
    assert_eq!((echo.shoot.u0, echo.shoot.lambda, echo.shoot.r_max), (2.5, 1.0, 10.0));
    let csv = read(&out, "shoot.csv");
    assert!(csv.starts_with("key,value\n"));
    assert!(csv.lines().any(|l| l == "result.u0,2.5"), "{csv}");
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, "[params]\nN = 1\ncolour = 3\n").unwrap();
    let code = qlap(dir.path(), &["--config", cfg_path.to_str().unwrap(), "regime"]);
    assert_eq!(code, EXIT_USAGE);
    let missing = dir.path().join("absent.toml");
    assert_ne!(qlap(dir.path(), &["--config", missing.to_str().unwrap(), "regime"]), EXIT_OK);
}

#[test]
fn weak_coupling_reports_vanishing() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "minimize", "--N", "1", "--q", "3", "--p", "4.5", "--alpha", "1e-4", "--m", "1", "--restarts", "1", "--n",
        "513",
    ];
    assert_eq!(qlap(dir.path(), &args), EXIT_VANISHING);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "minimize.json")).unwrap();
    assert_eq!(json["result"]["vanishing"], true);
    assert!(json["result"]["energy"].as_f64().unwrap() >= -1e-6);
    assert!(read(dir.path(), "profile.csv").starts_with("# N=1 "));
}

#[test]
fn zero_mass_nonexistence_is_certified() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qlap(dir.path(), &["zero-mass", "--N", "3", "--q", "3", "--p", "4"]), EXIT_OK);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "zero_mass.json")).unwrap();
    assert_eq!(json["found"], false);
    assert_ne!(EXIT_NUMERICAL, EXIT_OK);
}

#[test]
fn alpha_scan_keeps_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "scan", "--N", "1", "--q", "3", "--p", "4.5", "--m", "1", "--vary", "alpha", "--from", "20", "--to", "60",
        "--steps", "3", "--restarts", "1", "--n", "513",
    ];
    assert_eq!(qlap(dir.path(), &args), EXIT_OK);
    let csv = read(dir.path(), "scan.csv");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3, "{csv}");
    let swept: Vec<f64> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(swept, [20.0, 40.0, 60.0]);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "scan.json")).unwrap();
    // monotonicity is only asserted for mass sweeps
    assert!(json["nonincreasing"].is_null());
    let energies: Vec<f64> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(energies.windows(2).all(|w| w[1] < w[0]), "{energies:?}");
}
