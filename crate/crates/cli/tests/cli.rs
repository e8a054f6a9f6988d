use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn termdp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_termdp"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn export(dir: &Path, name: &str) -> String {
    let file = format!("{name}.json");
    let o = termdp(dir, &["fixture", "export", name, "--out", &file]);
    assert!(o.status.success(), "{o:?}");
    file
}

#[test]
fn solve_writes_value_and_policy_csv() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "example1");
    fs::write(dir.path().join("seed.csv"), "state,value\n0,0\n1,5\n").unwrap();
    let o = termdp(
        dir.path(),
        &["solve", "--problem", &f, "--init", "value:seed.csv", "--out-value", "v.csv", "--out-policy", "p.csv", "--trace", "t.csv"],
    );
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let v = fs::read_to_string(dir.path().join("v.csv")).unwrap();
    assert_eq!(v.lines().collect::<Vec<_>>(), ["state,value", "0,0.0000000000000000e0", "1,1.0000000000000000e0"]);
    let p = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(p, "state,control\n0,stay\n1,stay\n");
    let t = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let rows: Vec<&str> = t.lines().collect();
    assert_eq!(rows[0], "iter,sup_change,residual,num_infinite,state_0,state_1");
    assert!(rows[1].starts_with("1,4.0000000000000000e0,"));
    assert!(rows[2].starts_with("2,0.0000000000000000e0,"));
}

#[test]
fn every_algorithm_runs_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "example1");
    for algo in ["vi", "pi", "opi"] {
        let init = if algo == "opi" { "inf-outside" } else { "zero" };
        let o = termdp(dir.path(), &["solve", "--problem", &f, "--algo", algo, "--init", init, "--tie", "least", "--m", "1,3"]);
        assert_eq!(o.status.code(), Some(0), "{algo}: {o:?}");
        assert!(stdout(&o).starts_with("state,value\n"));
    }
    let mt = export(dir.path(), "min-time");
    let o = termdp(dir.path(), &["solve", "--problem", &mt, "--algo", "mm-vi", "--init", "inf-outside"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
}

#[test]
fn pi_from_a_policy_file_stalls_with_keep() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "example1");
    fs::write(dir.path().join("mu.csv"), "state,control\n0,stay\n1,move\n").unwrap();
    let o = termdp(dir.path(), &["solve", "--problem", &f, "--algo", "pi", "--init", "policy:mu.csv", "--out-policy", "p.csv"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("1,1.0000000000000000e0"));
    assert_eq!(fs::read_to_string(dir.path().join("p.csv")).unwrap(), "state,control\n0,stay\n1,move\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "example1");
    fs::write(dir.path().join("neg.json"), r#"{"kind":"finite","states":["a","b"],"terminal":["a"],"actions":{"b":[{"id":"go","next":"a","cost":-1}]}}"#).unwrap();
    fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    fs::write(dir.path().join("chain.json"), r#"{"kind":"finite","states":["t","a"],"terminal":["t"],"actions":{"a":[{"id":"go","next":"t","cost":1}]}}"#).unwrap();
    let cases: &[(&[&str], i32)] = &[
        (&["solve"], 1),
        (&["solve", "--problem", &f, "--algo", "nope"], 1),
        (&["solve", "--problem", &f, "--init", "sideways"], 1),
        (&["solve", "--problem", &f, "--tie", "random"], 1),
        (&["analyze", "residual", "--problem", &f], 1),
        (&["solve", "--problem", "neg.json"], 2),
        (&["solve", "--problem", "broken.json"], 2),
        (&["solve", "--problem", &f, "--algo", "mm-vi"], 2),
        (&["solve", "--problem", "chain.json", "--algo", "opi"], 2),
        (&["solve", "--problem", &f, "--init", "inf-outside", "--max-iters", "0"], 3),
        (&["solve", "--problem", "missing.json"], 4),
        (&["solve", "--problem", &f, "--init", "value:missing.csv"], 4),
        (&["fixture", "run", "nope"], 1),
        (&["--help"], 0),
    ];
    for (args, code) in cases {
        let o = termdp(dir.path(), args);
        assert_eq!(o.status.code(), Some(*code), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        if *code != 0 {
            assert!(!o.stderr.is_empty(), "{args:?} failed silently");
        }
    }
}

#[test]
fn analyze_reports_two_fixed_points_for_example1() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "example1");
    let o = termdp(dir.path(), &["analyze", "multiplicity", "--problem", &f]);
    assert!(stdout(&o).contains("fixed points: 2 (2 in class)"), "{}", stdout(&o));
    fs::write(dir.path().join("half.csv"), "state,value\n0,0\n1,0.5\n").unwrap();
    let o = termdp(dir.path(), &["analyze", "residual", "--problem", &f, "--value", "half.csv"]);
    assert_eq!(stdout(&o), "residual 0e0\nin_j_class true\n");
}

#[test]
fn assumption_report_is_structured_text() {
    let dir = tempfile::tempdir().unwrap();
    let f = export(dir.path(), "example1");
    let o = termdp(dir.path(), &["check", "assumptions", "--problem", &f]);
    let out = stdout(&o);
    assert!(out.starts_with("assumption report\n"));
    assert!(out.contains("  verdict: violated\n"), "{out}");
    assert!(out.contains("zero-cost cycle 1 -> 1"));
}

#[test]
fn linear_grid_problem_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("lq.json"),
        r#"{"kind":"linear_grid","A":[[2.0]],"B":[[1.0]],"cost":{"q":1.0,"r":1.0},
            "grid":{"bounds":[[-1.0,1.0]],"points":[201]},"controls":{"bounds":[[-4.0,4.0]],"points":[801]}}"#,
    )
    .unwrap();
    let o = termdp(dir.path(), &["solve", "--problem", "lq.json", "--out-value", "v.csv"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let v = fs::read_to_string(dir.path().join("v.csv")).unwrap();
    assert_eq!(v.lines().count(), 202);
    let o = termdp(dir.path(), &["check", "assumptions", "--problem", "lq.json"]);
    assert!(stdout(&o).contains("verdict: established"), "{}", stdout(&o));
}

#[test]
fn fixture_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = termdp(dir.path(), &["fixture", "list"]);
    let names: Vec<String> = stdout(&o).lines().map(|l| l.split_whitespace().next().unwrap().to_string()).collect();
    assert_eq!(names, ["example1", "example2", "example3", "example4", "lq", "min-time", "tube"]);
    for name in ["example1", "example3", "min-time", "tube"] {
        let o = termdp(dir.path(), &["fixture", "run", name]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stdout(&o));
        assert!(!stdout(&o).contains("FAIL"));
    }
    let o = termdp(dir.path(), &["fixture", "export", "example2", "--out", "x.json"]);
    assert_eq!(o.status.code(), Some(1));
}
