use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optcert"))
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn corpus_file(name: &str) -> String {
    corpus().join(name).display().to_string()
}

#[test]
fn check_failing_instance_exits_one() {
    let o = run(&["check", &corpus_file("ex1_fernandez.json"), "--check", "fj-smooth"]);
    assert_eq!(code(&o), 1);
    let report = stdout_json(&o);
    assert_eq!(report["tool"], "optcert");
    assert!(report["input_digest"].as_str().unwrap().starts_with("sha256:"));
    assert_eq!(report["records"][0]["status"], "fails");
    assert_eq!(report["exit_status"], 1);
}

#[test]
fn check_holding_instance_writes_json_copy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&[
        "check",
        &corpus_file("thm_contrast.json"),
        "--check",
        "fj-smooth",
        "--check",
        "kkt",
        "--json",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written, stdout_json(&o));
    assert_eq!(written["records"].as_array().unwrap().len(), 2);
}

#[test]
fn reports_are_deterministic() {
    let args = ["check", &corpus_file("abs_min.json"), "--check", "fj-convex", "--check", "subdiff:clarke"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn worst_status_wins() {
    let o = run(&[
        "check",
        &corpus_file("degenerate_fj.json"),
        "--check",
        "fj-smooth",
        "--check",
        "kkt",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn refused_check_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("many.json");
    let g = r#"{"op": "neg", "args": [{"op": "abs", "args": [{"op": "var", "name": "x"}]}]}"#;
    let ineqs = vec![g; 13].join(", ");
    let text = format!(
        r#"{{"name": "many", "variables": ["x"], "objective": {{"op": "var", "name": "x"}},
            "inequalities": [{ineqs}], "point": ["0"], "expect": []}}"#
    );
    std::fs::write(&path, text).unwrap();
    let o = run(&["check", path.to_str().unwrap(), "--check", "fj-quasidiff"]);
    assert_eq!(code(&o), 2);
    assert_eq!(stdout_json(&o)["records"][0]["status"], "inconclusive");
}

#[test]
fn malformed_input_exits_three_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"name\": \"bad\",\n  \"variables\": [\"x\"\n}\n").unwrap();
    let o = run(&["check", path.to_str().unwrap(), "--check", "kkt"]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn kkt_mode_on_convex_rule_is_rejected() {
    let o = run(&["check", &corpus_file("abs_min.json"), "--check", "fj-convex", "--mode", "kkt"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn fragment_errors_exit_three() {
    let o = run(&["check", &corpus_file("ex1_fernandez.json"), "--check", "fj-convex"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not certified convex"));
}

#[test]
fn shipped_corpus_matches() {
    let o = run(&["corpus", "run", "--dir", corpus().to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{text}");
    assert!(text.contains(" 0 mismatches"), "{text}");
}

#[test]
fn corpus_mismatch_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(corpus().join("thm_contrast.json"))
        .unwrap()
        .replacen("\"holds\"", "\"fails\"", 1);
    std::fs::write(dir.path().join("flipped.json"), text).unwrap();
    let o = run(&["corpus", "run", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL thm_contrast"));
}

#[test]
fn corpus_filter_without_match_warns() {
    let o = run(&["corpus", "run", "--dir", corpus().to_str().unwrap(), "--filter", "no-such-instance"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no corpus instance matches"));
}

#[test]
fn corpus_missing_dir_exits_three() {
    let o = run(&["corpus", "run", "--dir", "/nonexistent/corpus"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn ekeland_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("line.txt");
    std::fs::write(&path, "3 a b c\n0 1 2\n1 0 1\n2 1 0\n").unwrap();
    let o = run(&["ekeland", path.to_str().unwrap(), "--f", "3,1,0", "--z", "a", "--eps", "4", "--lambda", "8"]);
    assert_eq!(code(&o), 0);
    let r = stdout_json(&o);
    assert_eq!(r["y"], "c");
    assert_eq!(r["strict_minimizer"], true);

    let o = run(&["ekeland", path.to_str().unwrap(), "--f", "3,1,0", "--z", "a", "--eps", "1"]);
    assert_eq!(code(&o), 3, "f(a) is not an eps-minimizer");
    let o = run(&["ekeland", path.to_str().unwrap(), "--f", "3,1,0", "--z", "q", "--eps", "4"]);
    assert_eq!(code(&o), 3);
}
