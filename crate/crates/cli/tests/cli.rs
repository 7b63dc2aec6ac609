use std::fs;
use std::process::{Command, Output};

fn noisy_evo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisy-evo")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn preset_writes_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u");
    let o = noisy_evo(&["preset", "u-curve", "--trials", "5", "--budget", "200000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4, "{summary}");
    assert!(summary.lines().nth(2).unwrap().contains("fixed:m=19823"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["preset"], "u-curve");
    assert_eq!(manifest["specs"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["parameters"]["m"][1], 19823);
    assert!(out.join("trials.csv").exists());
}

#[test]
fn run_is_reproducible_from_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = noisy_evo(&[
            "run", "--problem", "leadingones", "--n", "16", "--noise", "onebit", "--p", "0.5", "--algo",
            "mu+1:mu=3", "--trials", "6", "--budget", "100000", "--seed", "9", "--jobs", jobs, "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(a.join("trials.csv")).unwrap(), fs::read(b.join("trials.csv")).unwrap());
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = noisy_evo(&[
        "sweep", "--n", "12", "--noise", "symmetric", "--trials", "3", "--budget", "2000", "--grid", "m=1,2",
        "--grid", "budget=100,1000", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn drift_profile_is_negative_near_the_optimum() {
    let o = noisy_evo(&["drift", "--noise", "symmetric", "--n", "100", "--m", "1", "--i", "1..9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "i,e_plus,e_minus,drift,method,ci_halfwidth");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    for row in rows {
        let drift: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!(drift <= -0.05, "{row}");
    }
}

#[test]
fn drift_writes_csv_and_manifest_with_out() {
    let dir = tempfile::tempdir().unwrap();
    let o = noisy_evo(&[
        "drift", "--noise", "reverse", "--n", "20", "--m", "2", "--i", "3", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("drift.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn expected_value_of_leading_ones_state() {
    // n = 4, k = 1, p = 1: (0 + 4 + 2 * 1) / 4.
    let o = noisy_evo(&["expected", "--problem", "leadingones", "--noise", "onebit", "--p", "1", "--n", "4", "--k", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "1.5");
}

#[test]
fn spectrum_lists_outcomes() {
    let o = noisy_evo(&["spectrum", "--noise", "symmetric", "--n", "10", "--zeros", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "kind,value_low,value_high,prob\natom,7,7,0.5\natom,13,13,0.5\n");
}

#[test]
fn invalid_input_exits_nonzero_with_one_line() {
    for args in [
        vec!["run", "--noise", "segmented", "--n", "10"],
        vec!["run", "--noise", "symmetric", "--n", "10", "--bogus"],
        vec!["run", "--noise", "symmetric", "--n", "10", "--policy", "fixed:m=0"],
        vec!["run", "--noise", "segmented", "--n", "200", "--algo", "1+lambda:lambda=2", "--policy", "adaptive"],
        vec!["preset", "v-curve"],
        vec!["drift", "--noise", "symmetric", "--n", "10", "--i", "5..20"],
    ] {
        let o = noisy_evo(&args);
        assert!(!o.status.success(), "{args:?}");
        let err = stderr(&o);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(stdout(&o).is_empty(), "{args:?}");
    }
}
