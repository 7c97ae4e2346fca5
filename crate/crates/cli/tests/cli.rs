//! End-to-end CLI tests: golden outputs, exit codes and report wiring.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrlim"))
        .args(args)
        .current_dir(fixtures_dir())
        .output()
        .expect("binary runs")
}

fn assert_golden(args: &[&str], golden: &str) {
    let out = run(args);
    let expected = std::fs::read(golden_dir().join(golden)).expect("golden file");
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&expected),
        "golden mismatch for {args:?}"
    );
}

#[test]
fn golden_outputs_are_stable() {
    assert_golden(&["validate", "endo_c2.dsl"], "validate_endo_c2.json");
    assert_golden(&["colimit", "coeq_2_3.dsl"], "colimit_coeq_2_3.json");
    assert_golden(&["recognize", "coeq_1_1.dsl"], "recognize_coeq_1_1.json");
    assert_golden(&["recognize", "endo_c2.dsl"], "recognize_endo_c2.json");
    assert_golden(&["eval", "fell_z2_trivial.dsl"], "eval_fell_z2_trivial.json");
    assert_golden(&["eval", "discrete_sum.dsl"], "eval_discrete_sum.json");
    assert_golden(&["eval", "chain_doubling.dsl"], "eval_chain_doubling.json");
    assert_golden(
        &["validate-cone", "fell_z2_trivial.dsl", "sign"],
        "validate_cone_sign.json",
    );
}

#[test]
fn exit_codes_follow_the_contract() {
    // 0 when all checks pass.
    assert_eq!(run(&["validate", "endo_c2.dsl"]).status.code(), Some(0));
    // 1 with a failure report on validation failure.
    let broken = run(&["validate", "fell_klein_broken.dsl"]);
    assert_eq!(broken.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_slice(&broken.stdout).expect("failure report is still JSON");
    assert_eq!(report["report"]["passed"], serde_json::json!(false));
    // The witness names a coherence triple.
    let has_witness = report["report"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| {
            !c["passed"].as_bool().unwrap()
                && c["witness"].as_str().unwrap_or("").starts_with('(')
        });
    assert!(has_witness, "failure must carry a witness triple");
    // 2 on usage and parse errors.
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let tmp = fixtures_dir().join("garbage_tmp.dsl");
    std::fs::write(&tmp, "shape endo; algebra A = blocks[1").unwrap();
    assert_eq!(run(&["validate", "garbage_tmp.dsl"]).status.code(), Some(2));
    std::fs::remove_file(&tmp).unwrap();
}

#[test]
fn colimit_headline_counts() {
    let out = run(&["colimit", "coeq_2_3.dsl"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["presentation"]["generators"].as_array().unwrap().len(), 6);
    assert_eq!(v["presentation"]["relations"].as_array().unwrap().len(), 13);
    assert!(v["defining_presentation"].is_object());
}

#[test]
fn eval_reports_blocks() {
    let out = run(&["eval", "fell_klein_pauli.dsl"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["blocks"], serde_json::json!([2]));
    let out = run(&["eval", "chain_stab.dsl"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["blocks"], serde_json::json!([2]));
    assert_eq!(v["evaluable"], serde_json::json!(true));
}

#[test]
fn cones_and_composition() {
    for name in ["triv", "sign"] {
        assert_eq!(
            run(&["validate-cone", "fell_z2_trivial.dsl", name])
                .status
                .code(),
            Some(0)
        );
    }
    let out = run(&["compose", "fell_z2_trivial.dsl", "tsign", "sign"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["passed"], serde_json::json!(true));
}

#[test]
fn repcheck_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let pres = dir.path().join("pres.json");
    let out = run(&["colimit", "fell_z2_trivial.dsl"]);
    std::fs::write(&pres, &out.stdout).unwrap();
    let assign = dir.path().join("assign.json");
    std::fs::write(
        &assign,
        serde_json::to_string_pretty(&serde_json::json!({
            "base": {"blocks": [1], "label": "C"},
            "mults": [1],
            "matrices": {
                "0": [[[1, 0]]],
                "1": [[[-1, 0]]],
            }
        }))
        .unwrap(),
    )
    .unwrap();
    let out = run(&["repcheck", pres.to_str().unwrap(), assign.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["passed"], serde_json::json!(true));

    // A broken assignment (not a unitary character) fails with exit 1.
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        serde_json::to_string_pretty(&serde_json::json!({
            "base": {"blocks": [1], "label": "C"},
            "mults": [1],
            "matrices": {
                "0": [[[1, 0]]],
                "1": [[[0.5, 0]]],
            }
        }))
        .unwrap(),
    )
    .unwrap();
    let out = run(&["repcheck", pres.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
