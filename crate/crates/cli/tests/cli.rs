use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whitenoise"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn default_ito_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-ito"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "verify-ito");
    assert_eq!(r["pass"], true);
    assert_eq!(r["config"]["grid"]["steps"], 512);
    assert!(r["result"]["relative_residual"].as_f64().unwrap() < 0.05);
    let ladder = fs::read_to_string(dir.path().join("ladder.csv")).unwrap();
    assert!(ladder.starts_with("n_steps,residual_l2,stderr,relative_residual\n"));
    assert_eq!(ladder.lines().count(), 5);
}

#[test]
fn out_of_range_hurst_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": {"family": {"kind": "fbm", "hurst": 1.2}}}"#);
    let o = run(&["covcheck", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("hurst") && msg.contains("(0, 1)"), "{msg}");
    assert!(!dir.path().join("out/report.json").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mc": {"paths": 10, "sed": 3}}"#);
    let o = run(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sed"));
}

#[test]
fn mismatched_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"command": "sde"}"#);
    let o = run(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn half_hurst_fbm_matches_brownian_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": {"family": {"kind": "fbm", "hurst": 0.5}, "order": 64},
            "covcheck": {"reference": {"kind": "bm"}}}"#,
    );
    let o = run(&["covcheck", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("out"));
    assert!(r["result"]["max_truncated_difference"].as_f64().unwrap() < 1e-2);
    assert!(r["result"]["max_closed_form_difference"].as_f64().unwrap() < 1e-12);
}

#[test]
fn truncated_brownian_covariance_fails_at_default_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["covcheck"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let r = report(dir.path());
    assert_eq!(r["pass"], false);
    assert!(r["result"]["max_abs_error"].as_f64().unwrap() > 1e-2);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["simulate", "--paths", "64", "--steps", "128", "--seed", "7"];
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let mut v = args.to_vec();
        v.extend(["--threads", threads]);
        assert_eq!(run(&v, out).status.code(), Some(0));
    }
    let pa = fs::read(a.join("paths.csv")).unwrap();
    assert_eq!(pa, fs::read(b.join("paths.csv")).unwrap());
    let (mut ra, mut rb) = (report(&a), report(&b));
    ra["config"]["output"].take();
    rb["config"]["output"].take();
    assert_eq!(ra, rb);
    assert_eq!(String::from_utf8(pa).unwrap().lines().count(), 64 * 129 + 1);
}

#[test]
fn seed_changes_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&["simulate", "--paths", "8", "--steps", "16", "--seed", "1"], &a);
    run(&["simulate", "--paths", "8", "--steps", "16", "--seed", "2"], &b);
    assert_ne!(fs::read(a.join("paths.csv")).unwrap(), fs::read(b.join("paths.csv")).unwrap());
}

#[test]
fn hermite_sampler_writes_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mc": {"paths": 16, "sampler": "hermite"}, "model": {"order": 16}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", &cfg, "--steps", "32"], &out);
    // sixteen modes leave too much variance behind for the default defect bound
    assert_eq!(o.status.code(), Some(1));
    let coords = fs::read_to_string(out.join("coords.csv")).unwrap();
    assert!(coords.starts_with("path_id,k,z\n"));
    assert_eq!(coords.lines().count(), 16 * 16 + 1);
}

#[test]
fn bin_parity_occupation_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"occupation": {"phi": {"kind": "bin-parity"}, "half_widths": [0.1, 0.05]}}"#,
    );
    let o = run(&["occupation", "--config", &cfg, "--paths", "100"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_lists_csv_columns() {
    let o = Command::new(env!("CARGO_BIN_EXE_whitenoise"))
        .args(["localtime", "--help"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("localtime.csv: path_id,level,value"), "{text}");
    let o = Command::new(env!("CARGO_BIN_EXE_whitenoise")).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    for c in ["basis-check", "covcheck", "verify-tanaka", "l2-diag", "sde"] {
        assert!(text.contains(c), "{c} missing from help");
    }
}

#[test]
fn half_hurst_fbm_matches_brownian_golden_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/bm_t0.5.csv");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"model": {{"family": {{"kind": "fbm", "hurst": 0.5}}}},
                 "covcheck": {{"golden": {{"path": "{table}", "t": 0.5}}}}}}"#
        ),
    );
    let out = dir.path().join("out");
    let o = run(&["covcheck", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["result"]["compared"], 64);
    assert!(fs::read_to_string(out.join("golden.csv"))
        .unwrap()
        .starts_with("k,golden,model,difference\n"));

    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"model": {{"family": {{"kind": "fbm", "hurst": 0.3}}}}, "covcheck": {{"golden": {{"path": "{table}", "t": 0.5}}}}}}"#
        ),
    );
    assert_eq!(run(&["covcheck", "--config", &cfg], &out).status.code(), Some(1));
}
