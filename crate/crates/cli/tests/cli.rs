//! Black-box tests of the `gmmsteer` binary: exit codes, output files,
//! and byte-level determinism of repeated runs.

use std::path::Path;
use std::process::{Command, Output};

fn gmmsteer(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gmmsteer"));
    let mut it = extra.iter();
    for a in args {
        cmd.arg(a);
        if a.starts_with("--") && matches!(*a, "--config" | "--policy" | "--out-dir" | "--samples" | "--out" | "--gmm") {
            cmd.arg(it.next().expect("path argument"));
        }
    }
    cmd.output().unwrap()
}

fn write_problem(dir: &Path) -> std::path::PathBuf {
    let config = dir.join("problem.json");
    let problem = serde_json::json!({
        "A": [[0.9, -0.1], [-0.1, 0.8]],
        "B": [[1.0], [0.0]],
        "N": 10,
        "Q": [[1.0, 0.0], [0.0, 1.0]],
        "R": [[1.0]],
        "initial_gmm": {
            "weights": [0.8, 0.2],
            "components": [
                {"mean": [-0.5, -0.6], "cov": [[0.02, 0.0], [0.0, 0.02]]},
                {"mean": [0.0, 0.0], "cov": [[0.02, 0.0], [0.0, 0.04]]}
            ]
        },
        "desired_gmm": [
            {"weight": 0.5, "mean": [0.5, 0.5], "cov": [[0.02, 0.0], [0.0, 0.02]]},
            {"weight": 0.5, "mean": [0.6, -0.6], "cov": [[0.02, 0.0], [0.0, 0.01]]}
        ]
    });
    std::fs::write(&config, serde_json::to_string_pretty(&problem).unwrap()).unwrap();
    config
}

#[test]
fn solve_then_simulate_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_problem(dir.path());
    let out = dir.path().join("out");

    let r = gmmsteer(&["solve", "--config", "--out-dir"], &[&config, &out]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["policy.json", "plan.json", "summary.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }

    let r = gmmsteer(
        &["simulate", "--count", "200", "--policy", "--config", "--out-dir"],
        &[&out.join("policy.json"), &config, &out],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("report.json").exists());
    assert!(out.join("terminal_samples.csv").exists());
    // Default snapshots: 0, 2, 4, 6, 8, 10 for N = 10.
    for k in [0, 2, 4, 6, 8, 10] {
        assert!(out.join(format!("snapshot_k{k}.csv")).exists());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_problem(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let r = gmmsteer(&["solve", "--config", "--out-dir"], &[&config, out]);
        assert!(r.status.success());
        let r = gmmsteer(
            &["simulate", "--count", "100", "--seed", "5", "--policy", "--config", "--out-dir"],
            &[&out.join("policy.json"), &config, out],
        );
        assert!(r.status.success());
    }
    for f in ["policy.json", "plan.json", "terminal_samples.csv", "report.json"] {
        let a = std::fs::read(out_a.join(f)).unwrap();
        let b = std::fs::read(out_b.join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
}

#[test]
fn shipped_config_solves() {
    let config = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/two_gaussians.json");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let r = gmmsteer(&["solve", "--config", "--out-dir"], &[&config, &out]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["expected_cost"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, "{ not json").unwrap();
    let out = dir.path().join("out");
    let r = gmmsteer(&["solve", "--config", "--out-dir"], &[&config, &out]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let r = gmmsteer(
        &["solve", "--config", "--out-dir"],
        &[&dir.path().join("nope.json"), &out],
    );
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn uncontrollable_system_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("problem.json");
    // B only actuates the first state and A is diagonal: the second state
    // is unreachable.
    let problem = serde_json::json!({
        "A": [[1.0, 0.0], [0.0, 1.0]],
        "B": [[1.0], [0.0]],
        "N": 4,
        "Q": [[1.0, 0.0], [0.0, 1.0]],
        "R": [[1.0]],
        "initial_gmm": [
            {"weight": 1.0, "mean": [0.0, 0.0], "cov": [[0.1, 0.0], [0.0, 0.1]]}
        ],
        "desired_gmm": [
            {"weight": 1.0, "mean": [1.0, 1.0], "cov": [[0.1, 0.0], [0.0, 0.1]]}
        ]
    });
    std::fs::write(&config, serde_json::to_string_pretty(&problem).unwrap()).unwrap();
    let out = dir.path().join("out");
    let r = gmmsteer(&["solve", "--config", "--out-dir"], &[&config, &out]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn policy_dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_problem(dir.path());
    let out = dir.path().join("out");
    let r = gmmsteer(&["solve", "--config", "--out-dir"], &[&config, &out]);
    assert!(r.status.success());

    // Same mixtures but a different horizon: the saved policy no longer
    // matches.
    let other = dir.path().join("other.json");
    let mut problem: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
    problem["N"] = serde_json::json!(5);
    std::fs::write(&other, serde_json::to_string_pretty(&problem).unwrap()).unwrap();
    let r = gmmsteer(
        &["simulate", "--policy", "--config", "--out-dir"],
        &[&out.join("policy.json"), &other, &out],
    );
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn fit_and_density_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    // Two tight clusters; EM with k=2 must find both.
    let mut csv = String::from("x0,x1\n");
    let mut lcg: u64 = 1;
    let mut noise = || {
        lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((lcg >> 32) as f64 / u32::MAX as f64 - 0.5) * 0.2
    };
    for _ in 0..200 {
        csv.push_str(&format!("{},{}\n", -3.0 + noise(), noise()));
        csv.push_str(&format!("{},{}\n", 3.0 + noise(), noise()));
    }
    let samples = dir.path().join("samples.csv");
    std::fs::write(&samples, csv).unwrap();

    let gmm_path = dir.path().join("fit.json");
    let r = gmmsteer(
        &["fit", "--components", "2", "--samples", "--out"],
        &[&samples, &gmm_path],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let fitted: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&gmm_path).unwrap()).unwrap();
    assert!(fitted["log_likelihood"].is_number());
    let mut means: Vec<f64> = fitted["components"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["mean"][0].as_f64().unwrap())
        .collect();
    means.sort_by(f64::total_cmp);
    assert!((means[0] + 3.0).abs() < 0.1 && (means[1] - 3.0).abs() < 0.1);

    let grid_out = dir.path().join("grid.csv");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gmmsteer"));
    cmd.arg("density")
        .arg("--gmm")
        .arg(&gmm_path)
        .args(["--grid=-4:4:9", "--grid=-1:1:3"])
        .arg("--out")
        .arg(&grid_out);
    let r = cmd.output().unwrap();
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(&grid_out).unwrap();
    assert_eq!(text.lines().count(), 1 + 9 * 3);
    assert!(text.lines().next().unwrap().starts_with("x0,x1,pdf"));

    // A bad grid spec is a config error.
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gmmsteer"));
    cmd.arg("density")
        .arg("--gmm")
        .arg(&gmm_path)
        .args(["--grid", "0:1:0", "--grid", "0:1:3"])
        .arg("--out")
        .arg(&grid_out);
    assert_eq!(cmd.output().unwrap().status.code(), Some(2));
}
