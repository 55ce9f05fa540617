use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

const FIGURE: &str = "p cnf 3 3\n-1 -2 3 0\n1 -2 3 0\n1 2 -3 0\n";
const UNSAT_PAIR: &str = "p cnf 1 2\n1 1 1 0\n-1 -1 -1 0\n";

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_sat2mapf")).args(args).output().expect("spawn sat2mapf");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

fn setup(name: &str, cnf: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(format!("{name}.cnf"));
    std::fs::write(&path, cnf).unwrap();
    (dir, path)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn figure_pipeline_monotone() {
    let (dir, cnf) = setup("fig", FIGURE);
    let prefix = dir.path().join("fig");
    let plan = dir.path().join("fig.plan");

    let r = run(&["reduce", s(&cnf)]);
    assert_eq!((r.code, r.stdout.as_str()), (0, "REDUCE n=12 V=84 dstar=327\n"));
    for ext in ["map", "agents", "layout"] {
        assert!(prefix.with_extension(ext).exists(), "missing .{ext}");
    }

    let r = run(&["witness", "--instance", s(&prefix), "--assignment", "1=1,2=0,3=1"]);
    assert_eq!((r.code, r.stdout.as_str()), (0, "WITNESS cost=327 dstar=327 ok=1\n"));

    let r = run(&["validate", "--instance", s(&prefix), "--plan", s(&plan), "--mode", "monotone"]);
    assert_eq!((r.code, r.stdout.as_str()), (0, "RESULT feasible=1 cost=327 dstar=327 monotone=1 sequential=1\n"));

    let r = run(&["extract", "--instance", s(&prefix), "--plan", s(&plan)]);
    assert_eq!((r.code, r.stdout.as_str()), (0, "EXTRACT assignment=1=1,2=0,3=1 satisfies=1\n"));

    let r = run(&["render", "--instance", s(&prefix), "--plan", s(&plan), "--time", "0"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout, run(&["render", "--instance", s(&prefix)]).stdout);
    assert_eq!(r.stdout.lines().count(), 3);
}

#[test]
fn figure_general_variant_sizes() {
    let (dir, cnf) = setup("fig", FIGURE);
    let prefix = dir.path().join("general");
    let r = run(&["reduce", s(&cnf), "--variant", "general", "--out", s(&prefix)]);
    assert_eq!((r.code, r.stdout.as_str()), (0, "REDUCE n=15 V=84 dstar=345\n"));
    let r = run(&["witness", "--instance", s(&prefix), "--solve"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.ends_with("ok=1\n"));
    let r = run(&["validate", "--instance", s(&prefix), "--plan", s(&prefix.with_extension("plan")), "--mode", "sequential"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("cost=345 dstar=345"));
}

#[test]
fn non_satisfying_assignment_is_a_no() {
    let (dir, cnf) = setup("fig", FIGURE);
    run(&["reduce", s(&cnf)]);
    let r = run(&["witness", "--instance", s(&dir.path().join("fig")), "--assignment", "1=0,2=1,3=0"]);
    assert_eq!((r.code, r.stdout.as_str()), (1, "WITNESS not-satisfying\n"));
}

#[test]
fn unsatisfiable_pair() {
    let (dir, cnf) = setup("pair", UNSAT_PAIR);
    let prefix = dir.path().join("pair");
    run(&["reduce", s(&cnf)]);

    let r = run(&["oracle", "--instance", s(&prefix), "--method", "monotone"]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.starts_with("ORACLE feasible=0 "));

    let r = run(&["witness", "--instance", s(&prefix), "--solve"]);
    assert_eq!((r.code, r.stdout.as_str()), (1, "WITNESS unsatisfiable\n"));

    let r = run(&["witness", "--instance", s(&prefix), "--fallback"]);
    assert_eq!((r.code, r.stdout.as_str()), (0, "WITNESS cost=123 dstar=121 ok=1\n"));
    let r = run(&["validate", "--instance", s(&prefix), "--plan", s(&prefix.with_extension("plan")), "--mode", "monotone"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("cost=123 dstar=121 monotone=1"));

    let general = dir.path().join("general");
    run(&["reduce", s(&cnf), "--variant", "general", "--out", s(&general)]);
    let r = run(&["oracle", "--instance", s(&general)]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.starts_with("ORACLE feasible=0 "));
}

#[test]
fn errors_exit_with_two() {
    let (dir, cnf) = setup("empty", "");
    let r = run(&["reduce", s(&cnf)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error: "));

    let r = run(&["validate", "--instance", s(&dir.path().join("missing")), "--plan", "nope"]);
    assert_eq!(r.code, 2);

    let (_dir, big) = setup("big", "p cnf 4 1\n1 2 3 4 0\n");
    assert_eq!(run(&["reduce", s(&big)]).code, 2);
}

#[test]
fn stats_are_seeded() {
    let a = run(&["stats", "--seed", "3", "--clauses", "5,10"]);
    let b = run(&["stats", "--seed", "3", "--clauses", "5,10"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout.lines().count(), 6);
    assert!(a.stdout.lines().all(|l| l.starts_with("STATS N=") && l.contains(" height=3 ")));
}

#[test]
fn quick_selftest_passes() {
    let r = run(&["selftest", "--quick"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(r.stdout.ends_with("SELFTEST pass=10 fail=0 skip=0\n"), "{}", r.stdout);
}
