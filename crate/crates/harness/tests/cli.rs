//! The `bison` binary end to end.

use std::process::Command;

fn bison(args: &[&str]) -> (bool, serde_json::Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_bison"))
        .args(args)
        .arg("--json")
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8(out.stdout).expect("utf-8 output");
    (
        out.status.success(),
        serde_json::from_str(&stdout).expect("JSON output"),
    )
}

#[test]
fn bench_reports_exact_counts() {
    let (ok, report) = bison(&["bench", "--iterations", "20", "--backend", "testgroup"]);
    assert!(ok);
    assert_eq!(report["scalar_mults"], 80);
    assert_eq!(report["hash_evals"], 80);
    assert_eq!(report["backend"], "testgroup-11-of-23");
}

#[test]
fn flow_is_stable_for_a_saved_user_table() {
    let dir = std::env::temp_dir().join(format!("bison-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let users = dir.join("users.json");
    let args = [
        "flow",
        "--account",
        "bob",
        "--audience",
        "127.0.0.1",
        "--users",
        users.to_str().unwrap(),
    ];
    let (ok1, first) = bison(&args);
    let (ok2, second) = bison(&args);
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(ok1 && ok2);
    assert_eq!(first["derivation_mode"], "bison");
    assert_eq!(first["audience"], "127.0.0.1");
    assert_eq!(first["pseudonym"], second["pseudonym"]);
}

#[test]
fn selfcheck_matches() {
    let (ok, out) = bison(&["selfcheck"]);
    assert!(ok);
    assert_eq!(out["matches"], true);
}

#[test]
fn unknown_attack_is_an_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_bison"))
        .args(["attack", "teleport"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn demo_once_signs_in_everywhere() {
    let (ok, flows) = bison(&["demo", "--once"]);
    assert!(ok);
    let flows = flows.as_array().unwrap();
    assert_eq!(flows.len(), 9);
    let modes: Vec<&str> = flows
        .iter()
        .map(|f| f["derivation_mode"].as_str().unwrap())
        .collect();
    assert_eq!(modes.iter().filter(|m| **m == "ppid-fallback").count(), 3);
}
