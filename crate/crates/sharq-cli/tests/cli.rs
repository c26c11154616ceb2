//! End-to-end CLI behaviour: exit codes, config round-trips, and the shape
//! of the emitted CSV.

use std::path::Path;
use std::process::Command;

fn sharq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sharq"))
}

fn write_scenario(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const ANALYZE_SCENARIO: &str = r#"
[link]
n = 500
rate = 0.25
pu_snr_db = 30.0
su_snr_db = 32.0

[traffic]
lambda_p_sweep = { start = 0.0, stop = 1.0, step = 0.25 }
lambda_s = 0.3333333333333333

[targets]
eps_s = 0.001
eps_p = 0.001

[policy]
mode = "explicit"
q = [0.7, 0.7, 0.7]
"#;

#[test]
fn analyze_rows_keep_bound_ordering_and_monotone_outage() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), ANALYZE_SCENARIO);
    let out = sharq()
        .arg("analyze")
        .arg("--scenario")
        .arg(&scenario)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "lambda_p,eps_s,eps_sl,eps_su,phi,eps_p,expected_delay,status"
    );
    let mut prev_eps = -1.0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(*fields.last().unwrap(), "OK", "unexpected row {line}");
        let lambda_p: f64 = fields[0].parse().unwrap();
        let eps_s: f64 = fields[1].parse().unwrap();
        let lo: f64 = fields[2].parse().unwrap();
        let hi: f64 = fields[3].parse().unwrap();
        assert!(
            lo <= eps_s + 1e-15 && eps_s <= hi + 1e-15,
            "sandwich broken: {line}"
        );
        if lambda_p == 0.0 {
            assert!(
                (lo - hi).abs() < 1e-15,
                "bounds must collapse at lambda_p 0"
            );
            assert!((eps_s - lo).abs() < 1e-15);
        }
        assert!(
            eps_s >= prev_eps,
            "outage must not drop as load grows: {line}"
        );
        prev_eps = eps_s;
    }
}

#[test]
fn analyze_higher_access_gives_lower_outage() {
    let dir = tempfile::tempdir().unwrap();
    let run = |q: &str| -> Vec<f64> {
        let scenario = write_scenario(
            dir.path(),
            &ANALYZE_SCENARIO.replace("q = [0.7, 0.7, 0.7]", q),
        );
        let out = sharq()
            .arg("analyze")
            .arg("--scenario")
            .arg(&scenario)
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let low = run("q = [0.3, 0.3, 0.3]");
    let high = run("q = [0.9, 0.9, 0.9]");
    for (l, h) in low.iter().zip(&high) {
        assert!(h <= l, "higher access probability must not worsen outage");
    }
}

#[test]
fn echo_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), ANALYZE_SCENARIO);
    let first = sharq()
        .arg("echo-config")
        .arg("--scenario")
        .arg(&scenario)
        .output()
        .unwrap();
    assert!(first.status.success());
    let echoed = dir.path().join("echoed.toml");
    std::fs::write(&echoed, &first.stdout).unwrap();
    let second = sharq()
        .arg("echo-config")
        .arg("--scenario")
        .arg(&echoed)
        .output()
        .unwrap();
    assert!(second.status.success());
    assert_eq!(
        first.stdout, second.stdout,
        "echo-config must be a fixed point"
    );
}

#[test]
fn zero_slot_simulation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        r#"
[link]
n = 500
rate = 0.25
pu_snr_db = 30.0
su_snr_db = 32.0

[traffic]
lambda_p = 0.5
lambda_s = 0.3333333333333333

[targets]
eps_s = 1.0
eps_p = 1.0

[policy]
mode = "explicit"
q = [0.5, 0.5, 0.5]

[sim]
num_slots = 0
seed = 1
arrivals = "constant"
"#,
    );
    let out = sharq()
        .arg("simulate")
        .arg("--scenario")
        .arg(&scenario)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("slot"), "unhelpful error: {err}");
}

#[test]
fn simulate_without_sim_section_fails() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), ANALYZE_SCENARIO);
    let out = sharq()
        .arg("simulate")
        .arg("--scenario")
        .arg(&scenario)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn infeasible_sweep_rows_are_marked_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    // An unreachable secondary target: below the always-transmit bound at
    // high load, feasible at low load.
    let scenario = write_scenario(
        dir.path(),
        &ANALYZE_SCENARIO
            .replace("mode = \"explicit\"", "mode = \"equal\"")
            .replace("eps_s = 0.001", "eps_s = 0.000001"),
    );
    let out = sharq()
        .arg("analyze")
        .arg("--scenario")
        .arg(&scenario)
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("INFEASIBLE(su-outage)"),
        "expected a marked infeasible row:\n{text}"
    );
}

#[test]
fn whole_sweep_infeasible_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        &ANALYZE_SCENARIO
            .replace("mode = \"explicit\"", "mode = \"equal\"")
            .replace("eps_s = 0.001", "eps_s = 1e-15")
            .replace("q = [0.7, 0.7, 0.7]", ""),
    );
    let out = sharq()
        .arg("analyze")
        .arg("--scenario")
        .arg(&scenario)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "whole sweep infeasible must exit 2"
    );
}

#[test]
fn missing_scenario_flag_is_an_error() {
    let out = sharq().arg("analyze").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn optimize_emits_policy_columns() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        &ANALYZE_SCENARIO
            .replace("mode = \"explicit\"", "mode = \"optimal\"")
            .replace(
                "lambda_p_sweep = { start = 0.0, stop = 1.0, step = 0.25 }",
                "lambda_p = 0.5",
            ),
    );
    let out = sharq()
        .arg("optimize")
        .arg("--scenario")
        .arg(&scenario)
        .arg("--grid-step")
        .arg("0.05")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "lambda_p,phi,eps_s,eps_p,q1,q2,q3,status"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 8);
    let eps_s: f64 = row[2].parse().unwrap();
    assert!(
        eps_s <= 0.001 + 1e-12,
        "optimized policy must meet the target"
    );
}
