use std::path::Path;
use std::process::Command;

use datasale_cli::{run, EXIT_CONFIG, EXIT_OK, EXIT_VERIFY};
use proptest::prelude::*;
use serde_json::Value;

fn exec(args: &[&str]) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("datasale").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let (code, out, err) = exec(&all);
    assert_eq!(code, EXIT_OK, "{err}");
    serde_json::from_str(&out).unwrap()
}

fn close(v: &Value, expected: f64) -> bool {
    (v.as_f64().unwrap() - expected).abs() < 1e-9
}

#[test]
fn default_equilibrium_without_sharing() {
    let v = json(&["equilibrium"]);
    let r = &v["result"];
    assert!(close(&r["uniform_price"], 0.5));
    assert!(close(&r["profit_a"], 0.125));
    assert!(close(&r["profit_b"], 0.5625));
    assert!(close(&r["consumer_welfare"], 2.0));
    assert_eq!(r["is_equilibrium"], true);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "equilibrium");
}

#[test]
fn full_sharing_is_not_individually_rational() {
    let v = json(&["compare", "--baseline", "none", "--candidate", "full"]);
    let rep = &v["result"]["report"];
    assert_eq!(rep["is_ir"], false);
    assert!(close(&rep["delta_profit_b"], -0.3125));
    assert!(close(&rep["delta_joint_profit"], -0.1875));
}

#[test]
fn constructed_opt_in_equilibrium_passes() {
    let v = json(&["optin", "--construct", "--pA", "0.5"]);
    let r = &v["result"];
    let iv = &r["candidate"]["c_star"][0];
    assert!(close(&iv["lo"], 0.25) && close(&iv["hi"], 0.375), "{iv}");
    for b in ["bullet1_ok", "bullet2_ok", "bullet3_ok", "bullet4_ok"] {
        assert_eq!(r["report"][b], true, "{b}");
    }
}

#[test]
fn failed_verification_exits_with_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    std::fs::write(&cfg, "[oracle]\ntolerance = 1e-12\n").unwrap();
    let (code, out, err) = exec(&[
        "validate",
        "--scenarios",
        "2",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_VERIFY, "{err}");
    assert!(out.contains("false"));
    assert!(err.contains("verification failed"));

    let (code, _, _) = exec(&["optin", "--construct", "--pA", "0.9"]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn emitted_report_reloads_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    let cfg = dir.path().join("s.toml");
    std::fs::write(
        &cfg,
        "[market]\nv = 3.7\nt = 1.3\n\n[distribution]\nkind = \"smoothed_step\"\nsplit = 0.4\nleft_mass = 0.65\nwidth = 0.1\n\n\
         [mechanism]\nkind = \"explicit\"\nintervals = [[0.1, 0.3]]\ntransfer = 0.01\n",
    )
    .unwrap();
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let (code, _, err) = exec(&["equilibrium", "--config", &p(&cfg), "--out", &p(&first)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, _, err) = exec(&["equilibrium", "--config", &p(&first), "--out", &p(&second)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let a = std::fs::read_to_string(&first).unwrap();
    let b = std::fs::read_to_string(&second).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bad_config_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[market]\nv = 3.0\nt = -1.0\n").unwrap();
    let (code, out, err) = exec(&["equilibrium", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(out.is_empty());
    assert!(err.contains("bad.toml:3:"), "{err}");

    std::fs::write(&cfg, "[market]\nv = 3.0\nt = 1.0\n\n[solver]\ngird = 0.1\n").unwrap();
    let (code, _, err) = exec(&["equilibrium", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("bad.toml:6:"), "{err}");
}

#[test]
fn usage_errors_exit_with_config_code() {
    assert_eq!(exec(&["frobnicate"]).0, EXIT_CONFIG);
    assert_eq!(exec(&["lemma1"]).0, EXIT_CONFIG);
    assert_eq!(
        exec(&["equilibrium", "--price-selection", "median"]).0,
        EXIT_CONFIG
    );
    assert_eq!(exec(&["--help"]).0, EXIT_OK);
}

#[test]
fn sweep_csv_is_ordered() {
    let (code, out, err) = exec(&[
        "sweep", "--param", "transfer", "--from", "0", "--to", "0.4", "--points", "5", "--format",
        "csv",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "schema_version,parameter,value,uniform_price,profit_a,profit_b,joint_profit,consumer_welfare,is_equilibrium"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    let values: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] < w[1]));
    for r in &rows {
        assert_eq!(r[0], "1");
        assert_eq!(r[1], "transfer");
        assert_eq!(r[6], "0.6875");
    }
}

#[test]
fn validate_passes_by_default() {
    let (code, out, err) = exec(&["validate", "--scenarios", "4", "--format", "csv"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.starts_with("schema_version,check,gap,tolerance,pass\n"));
    assert!(out.lines().skip(1).all(|l| l.ends_with(",true")), "{out}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_datasale");
    let ok = Command::new(bin).arg("equilibrium").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("p_A"));
    let bad = Command::new(bin)
        .args(["equilibrium", "--config", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn seed_changes_nothing(seed in any::<u64>(), cmd in 0usize..3) {
        let args: &[&str] = [
            &["equilibrium"][..],
            &["optimize", "--target", "pareto"][..],
            &["validate", "--scenarios", "2"][..],
        ][cmd];
        let (c0, plain, _) = exec(args);
        let s = seed.to_string();
        let mut seeded = args.to_vec();
        seeded.extend(["--seed", s.as_str()]);
        let (c1, with_seed, _) = exec(&seeded);
        prop_assert_eq!(c0, c1);
        prop_assert_eq!(plain, with_seed);
    }
}
