use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value as Json;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tokensync")).args(args).output().expect("binary runs")
}

fn run_scenario(cmd: &str, file: &str, extra: &[&str]) -> (i32, Json) {
    let path = scenario(file);
    let mut args = vec![cmd, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = run(&args);
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Json::Null);
    (out.status.code().unwrap(), report)
}

#[test]
fn canonical_consensus_passes() {
    let (code, report) = run_scenario("consensus", "consensus-k2.json", &[]);
    assert_eq!(code, 0);
    assert_eq!(report["pass"], true);
    assert_eq!(report["stats"]["schedules_explored"], 251);
}

#[test]
fn violations_exit_one_with_a_witness() {
    let (code, report) = run_scenario("consensus", "disagreement.json", &[]);
    assert_eq!(code, 1);
    assert!(report["clause"].as_str().unwrap().starts_with("agreement"));
    assert!(report["witness_schedule"].is_object());

    let (code, report) = run_scenario("consensus", "overdrawn-allowance.json", &[]);
    assert_eq!(code, 1);
    assert!(report["clause"].as_str().unwrap().starts_with("validity"));
}

#[test]
fn witness_schedule_replays_to_the_same_violation() {
    let (_, report) = run_scenario("consensus", "disagreement.json", &[]);
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("witness.json");
    std::fs::write(&sched, report["witness_schedule"].to_string()).unwrap();
    let (code, replayed) = run_scenario("consensus", "disagreement.json", &["--schedule", sched.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(replayed["clause"], report["clause"]);
    assert_eq!(replayed["stats"]["schedules_explored"], 1);
}

#[test]
fn resource_cap_exits_three() {
    let (code, _) = run_scenario("consensus", "consensus-k3.json", &["--max-schedules", "10"]);
    assert_eq!(code, 3);
}

#[test]
fn bad_input_exits_two() {
    let (code, _) = run_scenario("consensus", "no-such-file.json", &[]);
    assert_eq!(code, 2);
    let (code, _) = run_scenario("consensus", "example-history.json", &[]);
    assert_eq!(code, 2);
    assert_eq!(run(&["consensus", "--bogus"]).status.code(), Some(2));
    let (code, _) = run_scenario("commute", "example-q2.json", &["A:approve(B)", "B:transfer(a_C,1)"]);
    assert_eq!(code, 2);
}

#[test]
fn classify_reports_levels() {
    let (code, report) = run_scenario("classify", "example-q2.json", &[]);
    assert_eq!(code, 0);
    assert_eq!(report["k"], 2);
    assert_eq!(report["unique_transfer"]["a_B"], true);
}

#[test]
fn linearize_flags_stale_reads_and_failed_transfers() {
    let hist = scenario("stale-read-history.json");
    let (code, report) = run_scenario("linearize", "example-q0.json", &["--history", hist.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(report["failing_prefix"], 4);

    let (code, _) = run_scenario("linearize", "restricted-strict.json", &[]);
    assert_eq!(code, 1);
    let (code, _) = run_scenario("waitfree", "restricted-strict.json", &[]);
    assert_eq!(code, 0);
}

#[test]
fn commute_and_valency() {
    let (code, _) = run_scenario("commute", "example-q2.json", &["A:approve(B,1)", "B:transfer(a_C,1)"]);
    assert_eq!(code, 0);
    let (code, report) = run_scenario("commute", "example-q2.json", &["B:transfer(a_C,3)", "C:transferFrom(a_B,a_A,3)"]);
    assert_eq!(code, 1);
    assert_eq!(report["class"], "same_source_contention");

    let (code, report) = run_scenario("valency", "consensus-k2.json", &[]);
    assert_eq!(code, 0);
    assert_eq!(report["initial_valence"], "bivalent");
}

#[test]
fn replay_example_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["replay-example", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let written: Json = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let printed: Json = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(written, printed);
    assert_eq!(written["final"]["balances"]["a_A"], 8);
}
