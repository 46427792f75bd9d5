use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ons-unlearn"));
    cmd.env_remove("UNLEARN_OUT_DIR").env("RUST_LOG", "warn");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_echoes_the_standard_settings() {
    let out = run(&["validate"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("horizon = 400"), "{stdout}");
    assert!(stdout.contains("tau = 200"), "{stdout}");
    assert!(stdout.contains("T=400, tau=200, |U|=10, 20 seeds, 9 cells"), "{stdout}");
}

#[test]
fn validate_rejects_an_early_deletion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "early.toml", "[deletion]\ntau = 5\ncount = 10\n");
    let out = run(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("deletion set precedes stream start"), "{}", text(&out.stderr));
}

#[test]
fn validate_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[ons]\nbeta_grid = [1.2]\neta = 0.0\n[run]\nseeds = 0\n");
    let out = run(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("beta must lie in (0,1)"), "{err}");
    assert!(err.contains("ons.eta"), "{err}");
    assert!(err.contains("at least one seed"), "{err}");
}

#[test]
fn unknown_keys_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.toml", "[stream]\nhorizon = 400\nhorizn = 3\n");
    let out = run(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("horizn") && err.contains("line 3"), "{err}");
}

#[test]
fn one_seed_run_summarizes_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["run", "--seeds", "1", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));

    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(summary.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 9);
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for row in &rows {
        assert_eq!(&row[col("n_seeds")], "1");
        for std_col in ["recovery_time_std", "overshoot_std", "param_shock_std", "final_regret_std"] {
            assert_eq!(row[col(std_col)].parse::<f64>().unwrap(), 0.0);
        }
    }

    let again = dir.path().join("again.csv");
    let out = run(&["summarize", out_dir.join("rounds.csv").to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(std::fs::read(&again).unwrap(), summary.as_bytes());
}

#[test]
fn summarize_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.csv", "");
    let out = run(&["summarize", &empty]);
    assert_eq!(out.status.code(), Some(2));

    let renamed = write(
        dir.path(),
        "renamed.csv",
        "run_id,seed,model,env,intervention,t,loss,regret,tracking_error,trace_A,cond_A,cos_state,cos_update\n",
    );
    let out = run(&["summarize", &renamed]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("cum_regret"), "{}", text(&out.stderr));
}

#[test]
fn numeric_failure_exits_3_with_run_context() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "diverge.toml", "[ogd]\neta0 = 1e300\nradius = 1.7e308\n");
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        &cfg,
        "--model",
        "ogd",
        "--env",
        "stationary",
        "--seeds",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = text(&out.stderr);
    assert!(err.contains("OGD/stationary/baseline") && err.contains("seed 0"), "{err}");
}

#[test]
fn output_dir_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--model", "ogd", "--env", "stationary", "--seeds", "1", "--format", "json"])
        .env("UNLEARN_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let rows: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("rounds.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 400);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn stream_subcommand_writes_csv() {
    let out = run(&["stream", "--env", "drifting", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = text(&out.stdout);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("t,x_1,x_2,y,wstar_1,wstar_2"));
    assert_eq!(lines.count(), 400);
}

#[test]
fn bad_flags_exit_2() {
    assert_eq!(run(&["run", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}
