use std::path::Path;
use std::process::{Command, Output};

const ONE_DIM: &str = r#"seed = 3

[grid]
dim = 1
half_width = 16.0
points = 256

[nonlinearity]
terms = [{ coeff = 1.0, exponent = 4.0 }]

[potential]
degree = 2

[reduction]
k = 6

[scan]
eps = [0.2, 0.1]
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_varred-nls"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn help_lists_subcommands() {
    let out = Command::new(env!("CARGO_BIN_EXE_varred-nls"))
        .arg("--help")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in [
        "validate",
        "ground-state",
        "spectrum",
        "reduce",
        "solve",
        "scan-epsilon",
    ] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn ground_state_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), ONE_DIM, &["ground-state"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["ground_state.json", "profile.csv", "omega.bin"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f} not written");
    }
    let gs: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/ground_state.json")).unwrap())
            .unwrap();
    let energy = gs["energy"].as_f64().unwrap();
    assert!((energy - 4.0 / 3.0).abs() < 1e-8, "{energy}");
}

#[test]
fn violated_hypothesis_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ONE_DIM.replace("exponent = 4.0", "exponent = 2.0");
    let out = run(dir.path(), &cfg, &["validate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("out/hypotheses.json").is_file());
    // Later stages never start.
    let out = run(dir.path(), &cfg, &["ground-state"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out/ground_state.json").exists());
}

#[test]
fn iteration_cap_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{ONE_DIM}\n[tolerances]\ncrit = 1e-14\ncrit_max_iter = 3\n");
    let out = run(dir.path(), &cfg, &["ground-state"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unmet_certificate_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{ONE_DIM}\n[tolerances]\nfinal_residual = 1e-30\n");
    let out = run(dir.path(), &cfg, &["--quiet", "scan-epsilon"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "grid = ", &["validate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration"));
}

#[test]
fn solve_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), ONE_DIM, &["--quiet", "solve", "--eps", "0.1"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("out/solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("out/solution.bin").is_file());
}
