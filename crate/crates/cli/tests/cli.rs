use std::path::Path;
use std::process::{Command, Output};

use dtl_cli::{load_input, run, Command as Cmd, Input, Overrides, Report, BUNDLED_CONFIG};

fn dtl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtl")).args(args).output().unwrap()
}

fn bundled_path() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("poptarts.cfg").display().to_string()
}

/// A quick two-arm configuration.
const SMALL: &str = "\
[design]
arms = 2
shape = obf

[endpoint]
type = normal
theta_prime = 0.5
theta_zero = 0.1
sigma_sq = 1

[calibration]
alpha = 0.025
power = 0.8
omega = 1e-4

[effects]
null = 0, 0
lfc = theta_prime, theta_zero
";

#[test]
fn design_record_reproduces_the_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap();
    let record = dir.path().join("design.json");
    let record = record.to_str().unwrap();
    let from_cfg = dir.path().join("a.json");
    let from_record = dir.path().join("b.json");

    let out = dtl(&["design", "--config", cfg, "--out", record]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = dtl(&["evaluate", "--config", cfg, "--tol", "1e-4", "--out", from_cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let out = dtl(&["evaluate", "--config", record, "--tol", "1e-4", "--out", from_record.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&from_cfg).unwrap(), std::fs::read(&from_record).unwrap());

    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("boundaries ("), "{stdout}");
    assert!(stdout.contains("lfc"), "{stdout}");
}

#[test]
fn simulation_reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap();
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let out = dtl(&["simulate", "--config", cfg, "--reps", "1000", "--seed", "7", "--tol", "1e-4", "--json"]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            out.stdout
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let v: serde_json::Value = serde_json::from_slice(&runs[0]).unwrap();
    assert_eq!(v["replicates"], 1000);
    assert_eq!(v["seed"], 7);
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.cfg");
    std::fs::write(&empty, "").unwrap();
    let out = dtl(&["design", "--config", empty.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("missing required keys") && err.contains("design.arms"), "{err}");
    assert!(out.stdout.is_empty());

    let out = dtl(&["design", "--config", &bundled_path(), "--alpha", "1.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("calibration.alpha"));

    let out = dtl(&["evaluate", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert!(!out.status.success());

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, SMALL.replace("power = 0.8", "power = 0.8\nspeed = 3")).unwrap();
    let out = dtl(&["design", "--config", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 14: unknown key `calibration.speed`"));
}

#[test]
fn fixed_sample_size_skips_the_search() {
    let text = SMALL.replace("shape = obf", "shape = obf\nn_per_stage = 40");
    let Input::Config(inputs) = load_input(&text).unwrap() else { panic!() };
    assert_eq!(inputs.n_per_stage, Some(40));
    let Report::Design(r) = run(Cmd::Design, Input::Config(inputs), &Overrides::default()).unwrap() else { panic!() };
    assert_eq!(r.design.n_per_stage(), 40);
    assert!(r.pwer <= 0.025 && r.pwer >= 0.025 - 1e-4);
}

#[test]
fn bundled_config_loads() {
    assert!(matches!(load_input(BUNDLED_CONFIG).unwrap(), Input::Config(_)));
}
