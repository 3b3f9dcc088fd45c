use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tensor-als"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).env_remove("TENSOR_ALS_OUT_DIR").args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Ratios from the `ratio` column.
fn csv_ratios(csv: &str) -> Vec<f64> {
    csv.lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(9).filter(|s| !s.is_empty()))
        .map(|s| s.parse().unwrap())
        .collect()
}

#[test]
fn blambda_csv_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = run_in(
        dir.path(),
        &[
            "run", "--gallery", "blambda", "--lambda", "0.46", "--seed", "7", "--max-sweeps", "400",
            "--angle-tol", "1e-13", "--f-tol", "0", "-o", out.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut tail: Vec<f64> = csv_ratios(&csv).into_iter().rev().take(10).collect();
    tail.sort_by(f64::total_cmp);
    let median = 0.5 * (tail[4] + tail[5]);
    assert!((median - 0.847).abs() <= 0.01, "median {median}");
    assert!(stdout(&o).contains("linear"));
}

#[test]
fn mohlenkamp_is_superlinear() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["run", "--gallery", "mohlenkamp", "--tau", "0.4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("superlinear"), "{}", stdout(&o));
    assert!(dir.path().join("mohlenkamp.csv").exists());
}

#[test]
fn totally_orthogonal_is_superlinear() {
    let dir = tempfile::tempdir().unwrap();
    for seed in ["1", "2", "3", "7"] {
        let o = run_in(dir.path(), &["run", "--gallery", "totally_orthogonal", "--seed", seed]);
        assert!(stdout(&o).contains("superlinear"), "{}", stdout(&o));
    }
}

#[test]
fn desilva_lim_runs_without_flag() {
    // The parameter norm grows far too slowly for the growth monitor to fire.
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["run", "--gallery", "desilva_lim", "--n", "2", "--max-sweeps", "5000"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("desilva_lim.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 5000);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .current_dir(dir.path())
        .env("TENSOR_ALS_OUT_DIR", dir.path().join("sub").parent().unwrap())
        .args(["run", "--gallery", "counterexample"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("counterexample.csv").exists());
}

#[test]
fn csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        run_in(dir.path(), &["run", "--gallery", "tucker", "--seed", "3", "-o", p.to_str().unwrap()]);
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn config_files_flags_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let c1 = dir.path().join("one.json");
    let c2 = dir.path().join("two.json");
    std::fs::write(&c1, r#"{"gallery":"blambda","lambda":0.2,"n":4,"max_sweeps":3}"#).unwrap();
    std::fs::write(&c2, r#"{"gallery":"mohlenkamp","tau":0.3}"#).unwrap();
    let o = run_in(
        dir.path(),
        &["run", "--config", c1.to_str().unwrap(), "--config", c2.to_str().unwrap(), "--jobs", "2", "--max-sweeps", "2", "--f-tol", "0"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let one = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    let two = std::fs::read_to_string(dir.path().join("two.csv")).unwrap();
    // The flag overrides max_sweeps from the file.
    assert_eq!(one.lines().count(), 1 + 3 * 2);
    assert_eq!(two.lines().count(), 1 + 3 * 2);
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("bad.json");
    std::fs::write(&c, "{ nope").unwrap();
    let o = run_in(dir.path(), &["run", "--config", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = run_in(dir.path(), &["run", "--gallery", "mohlenkamp", "--tau", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run_in(dir.path(), &["run", "--gallery", "mohlenkamp", "--max-sweeps", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run_in(dir.path(), &["run"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn degenerate_start_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("zero.json");
    std::fs::write(
        &c,
        r#"{"problem":{"params":{"format":"cp","dims":[2,2],"ranks":[1],"blocks":[[0,0],[0,0]]},"b":[1,0,0,1]}}"#,
    )
    .unwrap();
    let o = run_in(dir.path(), &["run", "--config", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("degenerate"));
}

#[test]
fn gallery_describe_verify() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["gallery"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 6);
    let o = run_in(dir.path(), &["describe", "blambda"]);
    assert!(stdout(&o).contains("[0, 1/2]"));
    assert_eq!(run_in(dir.path(), &["describe", "unknown"]).status.code(), Some(1));
    let o = run_in(dir.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}
