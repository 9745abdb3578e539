//! CLI behavior: skip-and-report vs strict abort, declared error paths,
//! and report shapes.

use std::path::Path;
use std::process::{Command, Output};

fn speechweave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speechweave"))
        .args(args)
        .output()
        .expect("failed to launch speechweave")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is not JSON")
}

fn gen_corpus(dir: &Path, records: usize) -> std::path::PathBuf {
    let corpus = dir.join("corpus");
    let output = speechweave(&[
        "gen-synthetic",
        "--out-dir",
        corpus.to_str().unwrap(),
        "--records",
        &records.to_string(),
        "--seed",
        "11",
    ]);
    assert!(output.status.success());
    corpus.join("manifest.jsonl")
}

#[test]
fn gen_zero_records_writes_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_corpus(dir.path(), 0);
    assert_eq!(std::fs::read_to_string(manifest).unwrap(), "");
}

#[test]
fn align_of_empty_manifest_writes_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_corpus(dir.path(), 0);
    let out = dir.path().join("aligned.jsonl");
    let output = speechweave(&[
        "align",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = stdout_json(&output);
    assert_eq!(report["aligned"], 0);
    assert_eq!(std::fs::read_to_string(out).unwrap(), "");
}

#[test]
fn align_skips_record_with_missing_emissions_and_reports_it() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_corpus(dir.path(), 3);
    // Drop one record's emission file.
    std::fs::remove_file(dir.path().join("corpus/emissions/rec-000001.bin")).unwrap();
    let out = dir.path().join("aligned.jsonl");
    let output = speechweave(&[
        "align",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = stdout_json(&output);
    assert_eq!(report["aligned"], 2);
    assert_eq!(report["skipped"], 1);
    assert_eq!(report["skipped_records"][0]["id"], "rec-000001");
}

#[test]
fn align_strict_aborts_on_missing_emissions() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_corpus(dir.path(), 2);
    std::fs::remove_file(dir.path().join("corpus/emissions/rec-000000.bin")).unwrap();
    let out = dir.path().join("aligned.jsonl");
    let output = speechweave(&[
        "align",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--strict",
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("rec-000000"), "stderr: {stderr}");
}

#[test]
fn build_without_boundaries_is_skipped_or_aborts_under_strict() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_corpus(dir.path(), 2);
    // Strip boundaries to simulate an unaligned manifest.
    let stripped = dir.path().join("stripped.jsonl");
    let lines: Vec<String> = std::fs::read_to_string(&manifest)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("boundaries");
            serde_json::to_string(&v).unwrap()
        })
        .collect();
    std::fs::write(&stripped, lines.join("\n") + "\n").unwrap();

    let out = dir.path().join("built.jsonl");
    let output = speechweave(&[
        "build",
        "--manifest",
        stripped.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = stdout_json(&output);
    assert_eq!(report["built"], 0);
    assert_eq!(report["skipped"], 2);

    let output = speechweave(&[
        "build",
        "--manifest",
        stripped.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--strict",
    ]);
    assert!(!output.status.success());
}

#[test]
fn malformed_manifest_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("bad.jsonl");
    std::fs::write(&manifest, "{\"format_version\":1}\n").unwrap();
    let out = dir.path().join("aligned.jsonl");
    let output = speechweave(&[
        "align",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains(":1:"), "stderr: {stderr}");
}

#[test]
fn eval_er_identity_file_reports_zero_rate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("er.jsonl");
    std::fs::write(
        &input,
        "{\"reference\": \"The cat.\", \"hypothesis\": \"the cat\"}\n",
    )
    .unwrap();
    let output = speechweave(&["eval", "er", "--input", input.to_str().unwrap()]);
    let report = stdout_json(&output);
    assert_eq!(report["rate"], 0.0);
}

#[test]
fn simulate_whole_answer_chunk_reports_unit_speedup() {
    let output = speechweave(&[
        "simulate",
        "--text-tokens",
        "20",
        "--speech-merged",
        "80",
        "--chunk-size",
        "20",
    ]);
    let report = stdout_json(&output);
    assert_eq!(report["speedup"], 1.0);
}

#[test]
fn build_full_com_emits_single_speech_block() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_corpus(dir.path(), 2);
    let aligned = dir.path().join("aligned.jsonl");
    let output = speechweave(&[
        "align",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        aligned.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let out = dir.path().join("built.jsonl");
    let output = speechweave(&[
        "build",
        "--manifest",
        aligned.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--mode",
        "full-com",
    ]);
    assert!(output.status.success());
    for line in std::fs::read_to_string(&out).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let response = v["response"].as_str().unwrap();
        assert_eq!(response.matches("<sosp>").count(), 1);
    }
}

#[test]
fn eval_offtarget_requires_an_intended_language() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("r.jsonl");
    std::fs::write(&input, "{\"response\": \"hello\"}\n").unwrap();
    let output = speechweave(&["eval", "offtarget", "--input", input.to_str().unwrap()]);
    assert!(!output.status.success());

    let output = speechweave(&[
        "eval",
        "offtarget",
        "--input",
        input.to_str().unwrap(),
        "--intended",
        "en",
    ]);
    let report = stdout_json(&output);
    assert_eq!(report["ratio_percent"], 0.0);
}
