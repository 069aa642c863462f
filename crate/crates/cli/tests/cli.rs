use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn feigenlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feigenlab"))
        .current_dir(dir)
        .env_remove("FEIGENLAB_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_dir(o: &Output, cwd: &Path) -> PathBuf {
    let line = stdout(o).lines().find_map(|l| l.strip_prefix("run directory: ").map(str::to_owned)).expect("run dir");
    cwd.join(line)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn synthetic_balanced_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let o = feigenlab(tmp.path(), &["trichotomy", "--synthetic", "eta=1/m", "xi=1/m"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().next(), Some("Balanced"));
    let dir = run_dir(&o, tmp.path());
    assert!(dir.join("results.csv").exists() && dir.join("results.json").exists());
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = feigenlab(tmp.path(), &["--config", "missing.toml", "stats"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));
    assert_eq!(feigenlab(tmp.path(), &["stats", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(feigenlab(tmp.path(), &["stats", "--levels", "4..2"]).status.code(), Some(2));
    fs::write(tmp.path().join("typo.toml"), "[stats]\nsampels = 10\n").unwrap();
    assert_eq!(feigenlab(tmp.path(), &["--config", "typo.toml", "stats"]).status.code(), Some(2));
}

#[test]
fn failed_preconditions_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = feigenlab(tmp.path(), &["fibonacci", "--ell", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert_eq!(feigenlab(tmp.path(), &["trichotomy", "--synthetic", "eta=2", "xi=1"]).status.code(), Some(1));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("lab.toml"), "[run]\nout = \"elsewhere\"\n\n[stats]\nsamples = 1e3\nseed = 3\nhorizon = 200\n")
        .unwrap();
    let o = feigenlab(tmp.path(), &["--config", "lab.toml", "stats", "--seed", "9", "--basic"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o, tmp.path());
    assert!(dir.starts_with(tmp.path().join("elsewhere")));
    let m = manifest(&dir);
    assert_eq!(m["config"]["samples"], 1000);
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["config"]["horizon"], 200);
    assert_eq!(m["config"]["basic"], true);
    assert_eq!(m["seeds"], serde_json::json!([9]));
}

#[test]
fn stats_digests_do_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str, workers: &'static str| {
        [
            "--out", out, "--workers", workers, "stats", "--c", "-1.4011551890", "--levels", "0..4", "--samples", "2e4",
            "--seed", "7",
        ]
    };
    let one = feigenlab(tmp.path(), &args("a", "1"));
    let three = feigenlab(tmp.path(), &args("b", "3"));
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(three.status.code(), Some(0));
    let (ma, mb) = (manifest(&run_dir(&one, tmp.path())), manifest(&run_dir(&three, tmp.path())));
    assert_eq!(ma["workers"], 1);
    assert_eq!(mb["workers"], 3);
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["config"], mb["config"]);
}

#[test]
fn report_replays_a_measure_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = feigenlab(tmp.path(), &["measure", "--c", "-2", "--depth", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let dir = run_dir(&o, tmp.path());
    let dir_arg = dir.to_str().unwrap();
    let r = feigenlab(tmp.path(), &["--workers", "2", "report", dir_arg, "--replay"]);
    assert_eq!(r.status.code(), Some(0), "{}", stdout(&r));
    assert!(stdout(&r).contains("replay results.csv: identical"));
    // A tampered manifest is caught.
    let mut m = manifest(&dir);
    m["outputs"]["results.csv"] = Value::from("0".repeat(64));
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m).unwrap()).unwrap();
    assert_eq!(feigenlab(tmp.path(), &["report", dir_arg, "--replay"]).status.code(), Some(1));
    assert_eq!(feigenlab(tmp.path(), &["report", "nowhere"]).status.code(), Some(2));
}

#[test]
fn numbers_are_written_in_full() {
    let tmp = tempfile::tempdir().unwrap();
    let o = feigenlab(tmp.path(), &["find-param", "--kind", "superstable", "--period", "4"]);
    let csv = fs::read_to_string(run_dir(&o, tmp.path()).join("results.csv")).unwrap();
    let value: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((value + 1.310_702_641_336_833).abs() < 1e-14, "{csv}");
    assert!(csv.ends_with("\r\n"));
}
