//! Black-box tests of the fvspine binary: exit codes, determinism of the
//! emitted bodies, output-file handling, and thread-count overrides.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fvspine"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Body with the timestamp metadata stripped, for byte-identity comparison.
fn stable_body(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter(|l| !l.contains("timestamp_unix"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn eval_exits_zero_and_is_deterministic() {
    let args = ["harmonic", "eval", "--x", "1.0", "--y", "1.5"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stable_body(&a), stable_body(&b));
    assert!(stable_body(&a).contains("fourier_h"));
}

#[test]
fn csv_bodies_are_deterministic() {
    let args = [
        "fv", "run", "--x", "1.0", "--y", "2.0", "--horizon", "5", "--dt", "0.001", "--seed",
        "42", "--format", "csv",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    let body = stable_body(&a);
    assert_eq!(body, stable_body(&b));
    assert!(body.contains("# command = fv run"));
    assert!(body.contains("# seed = 42"));
    assert!(body.contains("# version = "));
    assert!(body.contains("k,m_k,t_k,y_k"));
}

#[test]
fn mc_is_deterministic_across_thread_counts() {
    let base = [
        "mc", "h", "--x", "1.0", "--y", "1.5", "--samples", "20000", "--dt", "0.001", "--seed",
        "7",
    ];
    let one = run(&[&base[..], &["--threads", "1"]].concat());
    let four = run(&[&base[..], &["--threads", "4"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(stable_body(&one), stable_body(&four));
}

#[test]
fn env_thread_override_works() {
    let out = bin()
        .args(["mc", "h", "--x", "1.0", "--y", "1.5", "--samples", "20000", "--dt", "0.001", "--seed", "7"])
        .env("FVSPINE_THREADS", "2")
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0));
    let plain = run(&[
        "mc", "h", "--x", "1.0", "--y", "1.5", "--samples", "20000", "--dt", "0.001", "--seed",
        "7",
    ]);
    assert_eq!(stable_body(&out), stable_body(&plain));
}

#[test]
fn bad_arguments_exit_four() {
    // Out-of-domain point.
    assert_eq!(
        run(&["harmonic", "eval", "--x", "5.0", "--y", "1.0"]).status.code(),
        Some(4)
    );
    // Unknown flag.
    assert_eq!(
        run(&["harmonic", "eval", "--x", "1.0", "--y", "1.0", "--bogus", "1"]).status.code(),
        Some(4)
    );
    // Missing required argument.
    assert_eq!(run(&["harmonic", "eval", "--x", "1.0"]).status.code(), Some(4));
    // Invalid simulation parameter.
    assert_eq!(
        run(&["fv", "run", "--x", "1.0", "--y", "1.0", "--horizon", "-3"]).status.code(),
        Some(4)
    );
}

#[test]
fn precision_error_exits_three() {
    // So close to the horizontal boundary that the series cannot certify the
    // requested tolerance within the term cap.
    let out = run(&["harmonic", "eval", "--x", "1.0", "--y", "0.0001", "--tol", "1e-12"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failed_numeric_check_exits_two() {
    // A deliberately short, coarse stationarity run cannot meet the
    // total-variation budget at 40 x 40 bins.
    let out = run(&[
        "fv",
        "stationarity",
        "--horizon",
        "20",
        "--reps",
        "2",
        "--dt",
        "0.001",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let body = String::from_utf8_lossy(&out.stdout);
    assert!(body.contains("\"pass\": false"));
}

#[test]
fn output_file_is_written() {
    let dir = std::env::temp_dir().join("fvspine-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("eval.json");
    let out = run(&[
        "harmonic",
        "eval",
        "--x",
        "1.0",
        "--y",
        "1.5",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let contents = std::fs::read_to_string(&path).unwrap();
    assert!(contents.contains("\"command\": \"harmonic eval\""));
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}
