//! Black-box tests of the command-line interface.

use std::io::Write;
use std::process::Command;

fn fairpipe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairpipe"))
}

fn scenario_file(content: &str) -> tempfile::NamedTempFile {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(content.as_bytes()).unwrap();
    file
}

const IMPOSSIBILITY: &str = r#"{
  "universe": {
    "individuals": ["a", "b", "c"],
    "metric": [["0","0","0"],["0","0","0"],["0","0","0"]]
  },
  "cohorts": {"explicit": [["a","b"],["a","c"],["b","c"]]},
  "mechanism": {"kind": "uniform"},
  "scoring": {"family": [{"table": {"name": "f", "values": [
    {"cohort": ["a","b"], "individual": "a", "score": "0"},
    {"cohort": ["a","b"], "individual": "b", "score": "0"},
    {"cohort": ["a","c"], "individual": "a", "score": "1"},
    {"cohort": ["a","c"], "individual": "c", "score": "1"},
    {"cohort": ["b","c"], "individual": "b", "score": "1/2"},
    {"cohort": ["b","c"], "individual": "c", "score": "1/2"}
  ]}}]},
  "audit": {"alpha": "10", "seed": 7}
}"#;

const FAIR_F1: &str = r#"{
  "universe": {
    "individuals": ["a", "b", "c", "d"],
    "qualifications": {"a": "0.8", "b": "0.7", "c": "0.5", "d": "0.2"}
  },
  "cohorts": {"all_size_k": 2},
  "mechanism": {"kind": "weighted_sampling",
                "weights": {"a": "0.8", "b": "0.7", "c": "0.5", "d": "0.2"}},
  "scoring": {"family": [{"per_individual": {"a": "0.8", "b": "0.7", "c": "0.5", "d": "0.2"}}]},
  "audit": {"alpha": "1", "seed": 1}
}"#;

#[test]
fn simulate_dumps_uniform_thirds() {
    let file = scenario_file(IMPOSSIBILITY);
    let out = fairpipe().args(["simulate"]).arg(file.path()).output().unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let cohorts = json["cohorts"].as_array().unwrap();
    assert_eq!(cohorts.len(), 3);
    for c in cohorts {
        assert_eq!(c["probability"], "1/3");
    }
}

#[test]
fn simulate_is_byte_identical_under_a_seed() {
    let file = scenario_file(FAIR_F1);
    let run = || {
        fairpipe()
            .args(["simulate", "--seed", "99", "--montecarlo", "50"])
            .arg(file.path())
            .output()
            .unwrap()
    };
    let a = run();
    let b = run();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_rejects_oversized_cohorts() {
    let bad = r#"{
      "universe": {"individuals": ["a"], "metric": [["0"]]},
      "cohorts": {"all_size_k": 2},
      "mechanism": {"kind": "uniform"}
    }"#;
    let file = scenario_file(bad);
    let out = fairpipe().args(["simulate"]).arg(file.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn audit_impossibility_fails_with_exit_one() {
    let file = scenario_file(IMPOSSIBILITY);
    let out = fairpipe().args(["audit", "--out", "json"]).arg(file.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["robust"], serde_json::Value::Bool(false));
    assert_eq!(json["alpha_star"]["cond-e"], serde_json::Value::Null);
}

#[test]
fn audit_fair_context_free_family_passes() {
    let file = scenario_file(FAIR_F1);
    let out = fairpipe().args(["audit"]).arg(file.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn audit_malformed_json_exits_two() {
    let file = scenario_file("{ not json");
    let out = fairpipe().args(["audit"]).arg(file.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flags_are_errors() {
    let file = scenario_file(FAIR_F1);
    let out = fairpipe().args(["audit", "--frobnicate"]).arg(file.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mmd_command_computes_exact_distance() {
    let out = fairpipe()
        .args(["mmd", "--g1", "0.7:1", "--g2", "0.6:1/2,0.8:1/2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("1/10"), "{text}");
}

#[test]
fn reproduce_impossibility_prints_pass_lines() {
    let out = fairpipe().args(["reproduce", "impossibility"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("[PASS]")), "{text}");
    assert!(text.contains("conditional expectation"));
}

#[test]
fn reproduce_unknown_name_exits_two() {
    let out = fairpipe().args(["reproduce", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_accepts_good_and_rejects_bad() {
    let file = scenario_file(FAIR_F1);
    let out = fairpipe().args(["validate"]).arg(file.path()).output().unwrap();
    assert!(out.status.success());

    let bad = FAIR_F1.replace("\"a\": \"0.8\"", "\"zz\": \"0.8\"");
    let file = scenario_file(&bad);
    let out = fairpipe().args(["validate"]).arg(file.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
