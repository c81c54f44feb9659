//! End-to-end runs of the binary.

use std::path::Path;
use std::process::{Command, Output};

const RUNNING: &str = r#"{
  "model": {"m": 1, "n": 1, "R": 1.0, "S0": [1.0, 1.0], "D": [0.5], "U": [2.0]},
  "option": {"c": [0.0, 1.0], "K": 1.0}
}"#;

const TWO_ASSETS: &str = r#"{
  "model": {"m": 2, "n": 3, "R": 1.01, "S0": [1.0, 1.0, 1.2], "D": [0.85, 0.7], "U": [1.2, 1.5]},
  "option": {"c": [0.0, 1.0, 1.0], "K": 2.2},
  "run": {"seed": 42, "samples": 20000, "verify_paths": 5}
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superhedge"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), config).unwrap();
    dir
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn price_running_example() {
    let dir = setup(RUNNING);
    let out = run(
        dir.path(),
        &[
            "price",
            "--config",
            "cfg.json",
            "--out",
            "o",
            "--dump-terms",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&dir.path().join("o/price.json"));
    assert_eq!(report["gamma_min"], 0.0);
    assert!((report["gamma_max"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(report["config"]["option"]["K"], 1.0);
    let terms = std::fs::read_to_string(dir.path().join("o/terms.csv")).unwrap();
    assert!(terms.starts_with("n_0,n_1,multinomial_weight,q_weight,basket_value,clipped_term\n"));
    assert_eq!(terms.lines().count(), 3);
}

#[test]
fn hedge_running_example_and_all_up_path() {
    let dir = setup(RUNNING);
    let out = run(dir.path(), &["hedge", "--config", "cfg.json", "--out", "o"]);
    assert!(out.status.success());
    let report = json(&dir.path().join("o/hedge.json"));
    let alpha: Vec<f64> = serde_json::from_value(report["alpha"].clone()).unwrap();
    assert!((alpha[0] + 1.0 / 3.0).abs() < 1e-15 && (alpha[1] - 2.0 / 3.0).abs() < 1e-15);

    let dir = setup(TWO_ASSETS);
    std::fs::write(dir.path().join("up.json"), "[[1,1],[1,1],[1,1]]").unwrap();
    let out = run(
        dir.path(),
        &[
            "hedge", "--config", "cfg.json", "--path", "up.json", "--out", "o",
        ],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("o/backtest.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,V_alpha,gamma_max,realized_slack,alpha_0,alpha_1,alpha_2"
    );
    for line in lines {
        let slack: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(slack.abs() < 1e-12, "{line}");
    }
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = setup(TWO_ASSETS);
    let a = run(
        dir.path(),
        &["verify", "--config", "cfg.json", "--out", "o"],
    );
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stdout)
    );
    let first = std::fs::read(dir.path().join("o/verify.json")).unwrap();
    let first_csv = std::fs::read(dir.path().join("o/verify.csv")).unwrap();
    let b = run(
        dir.path(),
        &["verify", "--config", "cfg.json", "--out", "o"],
    );
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(
        first,
        std::fs::read(dir.path().join("o/verify.json")).unwrap()
    );
    assert_eq!(
        first_csv,
        std::fs::read(dir.path().join("o/verify.csv")).unwrap()
    );
}

#[test]
fn fault_injection_fails_partial_sums() {
    let dir = setup(TWO_ASSETS);
    let out = run(
        dir.path(),
        &[
            "verify",
            "--config",
            "cfg.json",
            "--out",
            "o",
            "--fault-inject",
            "perturb-q0",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let report = json(&dir.path().join("o/verify.json"));
    assert_eq!(report["passed"], false);
    let partial = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == "partial_sums")
        .unwrap();
    assert_eq!(partial["passed"], false);
    assert!((partial["deviation"].as_f64().unwrap() - 1e-3).abs() < 1e-12);
}

#[test]
fn simulate_and_deform_write_reports() {
    let dir = setup(TWO_ASSETS);
    let out = run(
        dir.path(),
        &[
            "simulate", "--config", "cfg.json", "--out", "o", "--seed", "7",
        ],
    );
    assert!(out.status.success());
    let report = json(&dir.path().join("o/simulate.json"));
    let records = report["records"].as_array().unwrap();
    assert_eq!(records.len(), 3);
    for r in records {
        assert_eq!(r["seed"], 7);
        assert_eq!(r["verdict"], "pass");
    }
    let out = run(
        dir.path(),
        &[
            "deform", "--config", "cfg.json", "--out", "o", "--target", "0.3",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sweep = std::fs::read_to_string(dir.path().join("o/deform_sweep.csv")).unwrap();
    assert!(sweep.starts_with("s,d_1,d_2,u_1,u_2,phi\n"));
    let report = json(&dir.path().join("o/deform.json"));
    assert!((report["solution"]["phi"].as_f64().unwrap() - 0.3).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = setup(&RUNNING.replace(r#", "K": 1.0"#, ""));
    let out = run(dir.path(), &["price", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("option.K required"));

    let dir = setup(&RUNNING.replace(r#""D": [0.5]"#, r#""D": [1.5]"#));
    let out = run(dir.path(), &["price", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.D[0]"));

    let out = run(dir.path(), &["price", "--config", "missing.json"]);
    assert_eq!(out.status.code(), Some(3));

    let dir = setup(RUNNING);
    let out = run(
        dir.path(),
        &["deform", "--config", "cfg.json", "--target", "2.0"],
    );
    assert_eq!(out.status.code(), Some(1));
    let out = run(
        dir.path(),
        &["price", "--config", "cfg.json", "--beta", "-1"],
    );
    assert_eq!(out.status.code(), Some(1));
}
