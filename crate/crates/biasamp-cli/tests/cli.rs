use std::path::Path;
use std::process::{Command, Output};

fn biasamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biasamp")).args(args).env_remove("BIASAMP_OUT_DIR").output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{"scenario": "isotropic-sweep", "phi": [0.5], "psi": [0.75, 2.0], "n": 40,
    "replicates": 2, "output_csv": "small.csv"}"#;

#[test]
fn mp_check_default_passes() {
    let out = biasamp(&["mp-check"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("m = 6.18033988749"));
}

#[test]
fn unknown_suite_is_an_error_listing_the_names() {
    let out = biasamp(&["validate", "no-such-suite"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("joint-limit") && err.contains("determinism"), "{err}");
}

#[test]
fn single_suite_prints_one_line() {
    let out = biasamp(&["validate", "shared-covariance"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("[PASS]  4 shared-covariance"));
}

#[test]
fn sweep_writes_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = biasamp(&["sweep", &cfg, "--out-dir", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("small.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(tmp.path().join("isotropic-sweep.svg").exists());
}

#[test]
fn out_dir_falls_back_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let target = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_biasamp"))
        .args(["sweep", &cfg, "--theory-only"])
        .env("BIASAMP_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(target.join("small.csv")).unwrap();
    // --theory-only leaves the simulation columns empty
    let row = csv.lines().nth(1).unwrap();
    assert!(row.contains(",,,,"));
}

#[test]
fn flagged_points_exit_2_unless_allowed() {
    let tmp = tempfile::tempdir().unwrap();
    // φ = 0.001 rounds to d = 0 at n = 40
    let cfg = write_config(
        tmp.path(),
        r#"{"scenario": "isotropic-sweep", "phi": [0.001, 0.5], "psi": [1.5], "n": 40,
            "replicates": 0, "output_csv": "f.csv"}"#,
    );
    let dir = tmp.path().to_str().unwrap();
    let out = biasamp(&["sweep", &cfg, "--out-dir", dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 of 2 grid points flagged"));
    // the CSV is still written, with the flag in the last column
    let csv = std::fs::read_to_string(tmp.path().join("f.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("size error"));
    assert!(biasamp(&["sweep", &cfg, "--out-dir", dir, "--allow-flags"]).status.success());
}

#[test]
fn bad_config_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"scenario": "isotropic-sweep", "bogus": 1}"#);
    let out = biasamp(&["sweep", &cfg, "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn plot_subcommand_renders_a_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().to_str().unwrap();
    assert!(biasamp(&["sweep", &cfg, "--out-dir", dir]).status.success());
    let csv = tmp.path().join("small.csv");
    let out_svg = tmp.path().join("p.svg");
    let out = biasamp(&[
        "plot",
        csv.to_str().unwrap(),
        "--x",
        "psi",
        "--y",
        "th_r1j,mc_r1j_mean",
        "--log-x",
        "--out",
        out_svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(&out_svg).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);

    let bad = biasamp(&["plot", csv.to_str().unwrap(), "--x", "psi", "--y", "nope"]);
    assert!(!bad.status.success());
}
