//! The built binary end to end.

use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cocycle-lab")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn le_writes_header_and_table() {
    let (code, out, _) = run(&["le", "-s", "lambda=1000", "-s", "e=0", "-s", "n=64", "-s", "x_grid=16"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("# cocycle-lab "));
    assert!(out.contains("# lambda = 1000"));
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "E,n,L_n");
    let l: f64 = rows[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!(l > 0.5 * 1000f64.ln());
}

#[test]
fn header_reproduces_the_run() {
    let dir = std::env::temp_dir().join(format!("cocycle-lab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let args = ["ids", "-s", "lambda=10", "-s", "e_range=-3:3:5", "-s", "n=50", "-s", "phases=4"];
    let (_, first, _) = run(&args);
    let config: String = first.lines().filter_map(|l| l.strip_prefix("# ")).filter(|l| l.contains(" = ")).map(|l| format!("{l}\n")).collect();
    let path = dir.join("run.cfg");
    std::fs::write(&path, config).unwrap();
    let (code, second, _) = run(&["ids", "-c", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(first, second);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn configuration_errors_exit_with_two() {
    let (code, _, err) = run(&["le", "-s", "e=0"]);
    assert_eq!(code, 2);
    assert!(err.contains("lambda"), "{err}");
    let (code, _, err) = run(&["le", "-s", "lamda=3"]);
    assert_eq!(code, 2);
    assert!(err.contains("lamda"), "{err}");
}
