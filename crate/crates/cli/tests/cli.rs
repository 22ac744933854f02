use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locklimit"))
        .args(args)
        .env_remove("LOCKLIMIT_BUDGET")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = run(&full);
    let value = serde_json::from_slice(&out.stdout).expect("report is JSON");
    (out.status.code().unwrap(), value)
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_the_corpus() {
    for name in ["philosophers.dlss", "counter.dlss", "crossed_locks.dlss", "stuck.dlss"] {
        let (code, v) = json(&["validate", path(&corpus(name))]);
        assert_eq!(code, 0, "{name}: {v}");
        assert_eq!(v["exit_code"], 0);
    }
    let (_, v) = json(&["validate", path(&corpus("counter.dlss"))]);
    assert_eq!(v["result"]["pushdown"], true);
}

#[test]
fn malformed_and_missing_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dlss");
    std::fs::write(&bad, "system broken\nprocess p_init arity 0 init s0 {\n  s0 -a-> \n}\n").unwrap();
    let (code, v) = json(&["validate", path(&bad)]);
    assert_eq!(code, 2);
    assert!(v["result"]["syntax_errors"].as_array().is_some_and(|e| !e.is_empty()));

    let (code, v) = json(&["validate", path(&dir.path().join("absent.dlss"))]);
    assert_eq!(code, 2);
    assert!(v["error"].as_str().unwrap().contains("cannot read"));
}

#[test]
fn undeclared_process_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("v.dlss");
    std::fs::write(&file, "system v\nprocess p_init arity 0 init s0 {\n  s0 -go-> s1 spawn ghost()\n}\n").unwrap();
    let (code, v) = json(&["validate", path(&file)]);
    assert_eq!(code, 2, "{v}");
}

#[test]
fn nested_reports_the_offending_word() {
    let (code, v) = json(&["nested", path(&corpus("crossed_locks.dlss"))]);
    assert_eq!(code, 3);
    assert_eq!(v["result"]["nested"], false);
    let witness = v["result"]["processes"]
        .as_array()
        .unwrap()
        .iter()
        .find_map(|p| p["witness"].as_array().cloned())
        .unwrap();
    assert!(!witness.is_empty());

    let (code, v) = json(&["nested", path(&corpus("philosophers.dlss"))]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["nested"], true);
}

#[test]
fn verify_finds_the_deadlock_and_writes_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let witness = dir.path().join("w.json");
    let dot = dir.path().join("w.dot");
    let (code, v) = json(&[
        "verify",
        path(&corpus("deadlock_pair.dlss")),
        "--template",
        "global-deadlock",
        "--witness",
        path(&witness),
        "--dot",
        path(&dot),
    ]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["satisfiable"], true);
    assert_eq!(v["result"]["exact"], true);
    assert_eq!(v["result"]["schedule_reaches_fair_config"], true);
    assert!(v["stats"].get("millis").is_none());
    let w: Value = serde_json::from_str(&std::fs::read_to_string(&witness).unwrap()).unwrap();
    assert_eq!(w["finite"], true);
    assert!(!w["nodes"].as_array().unwrap().is_empty());
    assert!(std::fs::read_to_string(&dot).unwrap().starts_with("digraph"));
}

#[test]
fn verify_unsatisfiable_objectives() {
    let (code, v) = json(&["verify", path(&corpus("nop_loop.dlss")), "--template", "global-deadlock"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["verdict"], "unsatisfiable");
    assert_eq!(v["result"]["exact"], true);
}

#[test]
fn verify_rejects_non_nested_systems_and_tiny_budgets() {
    let (code, _) = json(&["verify", path(&corpus("crossed_locks.dlss")), "--template", "global-deadlock"]);
    assert_eq!(code, 3);
    let (code, v) =
        json(&["verify", path(&corpus("philosophers.dlss")), "--template", "global-deadlock", "--budget", "10"]);
    assert_eq!(code, 4, "{v}");
    let (code, _) = json(&["verify", path(&corpus("philosophers.dlss"))]);
    assert_eq!(code, 2);
    let (code, _) = json(&["verify", path(&corpus("philosophers.dlss")), "--template", "no-such-template"]);
    assert_eq!(code, 2);
}

#[test]
fn verify_reports_are_reproducible() {
    let file = corpus("stuck.dlss");
    let args = ["verify", path(&file), "--template", "global-deadlock"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().any(|l| l == "satisfiable: true"), "{text}");
}

#[test]
fn pushdown_verify_warns_about_missing_witness() {
    let dir = tempfile::tempdir().unwrap();
    let witness = dir.path().join("w.json");
    let (code, v) = json(&[
        "verify",
        path(&corpus("stuck.dlss")),
        "--template",
        "global-deadlock",
        "--pushdown",
        "--witness",
        path(&witness),
    ]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["procedure"], "pushdown");
    assert_eq!(v["result"]["satisfiable"], true);
    assert!(v["warnings"].to_string().contains("no witness"));
    assert!(!witness.exists());
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let file = corpus("philosophers.dlss");
    let args = ["simulate", path(&file), "--steps", "200", "--seed", "1"];
    let (code, a) = json(&args);
    let (_, b) = json(&args);
    assert_eq!(code, 0);
    assert_eq!(a, b);
    assert!(a["result"]["steps"].as_u64().unwrap() <= 200);

    let (code, v) = json(&["simulate", path(&file), "--steps", "0"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["steps"], 0);
    assert_eq!(v["result"]["nodes"], 1);

    let (code, v) = json(&["simulate", path(&file), "--steps", "50", "--scheduler", "round-robin"]);
    assert_eq!(code, 0);
    assert!(v["result"]["trace"].is_array());
}

#[test]
fn oracle_with_no_nodes_is_empty() {
    let (code, v) = json(&["oracle", path(&corpus("philosophers.dlss")), "--max-nodes", "0"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["trees"], 0);
    assert_eq!(v["result"]["agreement_percent"], 100.0);
}

#[test]
fn oracle_agrees_on_small_trees() {
    let (code, v) = json(&["oracle", path(&corpus("deadlock_pair.dlss")), "--max-nodes", "8", "--template", "global-deadlock"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["agreement_percent"], 100.0);
    let (code, v) = json(&["oracle", "--random", "3", "--seed", "5", "--max-nodes", "6", "--jobs", "2"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["systems"], 3);
    assert_eq!(v["result"]["agreement_percent"], 100.0);
}

#[test]
fn oracle_budget_exits_4() {
    let (code, _) = json(&["oracle", path(&corpus("philosophers.dlss")), "--max-nodes", "30", "--budget", "5"]);
    assert_eq!(code, 4);
}
