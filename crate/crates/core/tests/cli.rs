use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use serde_json::Value;

use rankreg::ranks::rank_ate_pairs;
use rankreg::simlab::rng::stream;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rankreg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn json_error(out: &Output) -> Value {
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    serde_json::from_slice(&out.stderr).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Randomized binary design with an instrument, a pre-period outcome and a
/// running variable, written as CSV.
fn dataset(n: usize) -> (String, Vec<f64>, Vec<f64>) {
    let mut rng = stream(5, 0);
    let mut text = String::from("y,w,z,y_pre,run,x1\n");
    let (mut y1, mut y0) = (Vec::new(), Vec::new());
    for _ in 0..n {
        let z = rng.random_bool(0.5);
        let w = if z { rng.random_bool(0.8) } else { rng.random_bool(0.2) };
        let x: f64 = rng.random_range(-1.0..1.0);
        let y_pre: f64 = x + rng.random_range(-1.0..1.0);
        let y = y_pre + 0.3 * f64::from(w) + rng.random_range(-1.0..1.0);
        let run: f64 = rng.random_range(-1.0..1.0);
        if w { y1.push(y) } else { y0.push(y) }
        text.push_str(&format!("{y},{},{},{y_pre},{run},{x}\n", u8::from(w), u8::from(z)));
    }
    (text, y1, y0)
}

#[test]
fn ols_matches_the_pair_count() {
    let dir = tempfile::tempdir().unwrap();
    let (text, y1, y0) = dataset(300);
    let csv = write(dir.path(), "d.csv", &text);
    let v = json_stdout(&run(&["ols", arg(&csv)]));
    assert_eq!(v["estimator"], "rank_ols_nocov");
    assert_eq!(v["n"], 300);
    // on tie-free data the rank-OLS slope equals the pair-count rank-ATE
    let want = rank_ate_pairs(&y1, &y0).unwrap();
    let got = v["value"].as_f64().unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn every_estimator_command_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "d.csv", &dataset(400).0);
    let p = arg(&csv);
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["ols", p, "--ref", "treated"], "rank_ols_ref_treated"),
        (vec!["ols", p, "--x", "x1"], "rank_ols_cov"),
        (vec!["ols", p, "--x", "x1", "--interact"], "rank_ols_interacted"),
        (vec!["ols-general", p, "--transform", "dichotomize:0.5"], "rank_ols_general"),
        (vec!["ols-general", p, "--transform", "rank", "--normalize"], "rank_ols_general"),
        (vec!["tsls", p], "rank_2sls"),
        (vec!["tsls", p, "--complier", "--zeta", "0.25"], "rank_2sls_complier"),
        (vec!["did", p], "rank_did"),
        (vec!["did", p, "--modified"], "rank_mdid"),
        (vec!["rdd", p, "--cutoff", "0", "--bandwidth", "0.5"], "rank_rdd"),
        (vec!["rdd", p, "--cutoff", "-0.1", "--modified", "--kernel", "uniform"], "rank_mrdd"),
        (vec!["bounds", p], "fan_park_bounds"),
    ];
    for (args, prefix) in cases {
        let v = json_stdout(&run(&args));
        let name = v["estimator"].as_str().unwrap();
        assert!(name.starts_with(prefix), "{args:?}: {name}");
        let value = v["value"].as_f64().unwrap();
        assert!(value.is_finite() && value.abs() <= 1.0, "{args:?}: {value}");
    }
}

#[test]
fn csv_output_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "d.csv", &dataset(50).0);
    let out = run(&["bounds", arg(&csv), "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("estimator,estimand,value,n,"));
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
}

#[test]
fn renamed_columns_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "d.csv", "outcome,arm\n1,0\n2,0\n3,1\n4,1\n");
    let direct = json_stdout(&run(&["ols", arg(&csv), "--y", "outcome", "--w", "arm"]));
    assert_eq!(direct["value"], 0.5);
    let config = write(
        dir.path(),
        "run.toml",
        &format!(
            "command = \"ols\"\ninput = \"{}\"\n[columns]\ny = \"outcome\"\nw = \"arm\"\n",
            csv.display()
        ),
    );
    let from_file = json_stdout(&run(&["--config", arg(&config)]));
    assert_eq!(from_file["value"], 0.5);
    let overridden = run(&["--config", arg(&config), "ols", "--format", "csv"]);
    assert!(String::from_utf8(overridden.stdout).unwrap().starts_with("estimator,"));
}

#[test]
fn jitter_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "d.csv", "y,w\n1,0\n1,1\n2,0\n2,1\n2,1\n3,0\n");
    let a = run(&["ols", arg(&csv), "--tie-policy", "jitter", "--seed", "3"]);
    let b = run(&["ols", arg(&csv), "--tie-policy", "jitter", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let literal = json_stdout(&run(&["ols", arg(&csv)]));
    assert_ne!(json_stdout(&a)["value"], literal["value"]);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(PathBuf, Vec<&str>, &str)> = vec![
        (write(dir.path(), "a.csv", "y,w\n1,0\n2,1\n"), vec!["tsls"], "MissingColumn"),
        (write(dir.path(), "b.csv", "y,w\n1,0\n2,2\n"), vec!["ols"], "NonBinaryColumn"),
        (write(dir.path(), "c.csv", "y,w\n1,0\nx,1\n"), vec!["ols"], "ParseError"),
        (write(dir.path(), "d.csv", "y,w,run\n1,0,1\n2,1,2\n"), vec!["rdd"], "Config"),
        (dir.path().join("absent.csv"), vec!["ols"], "Io"),
    ];
    for (path, cmd, code) in cases {
        let mut args = cmd.clone();
        args.push(arg(&path));
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{cmd:?}");
        let e = json_error(&out);
        assert_eq!(e["error"]["code"], code, "{e}");
        assert_eq!(e["error"]["exit_code"], 2);
    }
    let e = json_error(&run(&["ols", "--no-such-flag"]));
    assert_eq!(e["error"]["code"], "Usage");
}

#[test]
fn parse_errors_name_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "c.csv", "y,w\n1,0\n2,1\nnan,1\n");
    let e = json_error(&run(&["ols", arg(&csv)]));
    assert!(e["error"]["message"].as_str().unwrap().contains("row 3"), "{e}");
}

#[test]
fn estimator_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "d.csv", "y,w\n1,1\n2,1\n3,1\n");
    let out = run(&["ols", arg(&csv)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_error(&out)["error"]["exit_code"], 1);
}

#[test]
fn simulate_list_and_files() {
    let out = run(&["simulate", "--list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.contains("randomized-shift"));

    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let plot = dir.path().join("p.csv");
    let out = bin()
        .args(["simulate", "--scenario", "three-dose", "--ns", "100,200", "--reps", "4", "--format", "csv"])
        .arg("--out")
        .arg(&table)
        .arg("--plotdata")
        .arg(&plot)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(fs::read_to_string(&table).unwrap().lines().count(), 3);
    let plot = fs::read_to_string(&plot).unwrap();
    assert_eq!(plot.lines().next().unwrap(), "run_id,n,rep,estimate,oracle");
    assert_eq!(plot.lines().count(), 1 + 2 * 4);

    let e = json_error(&run(&["simulate", "--scenario", "nope"]));
    assert_eq!(e["error"]["code"], "InvalidSpec");
}
