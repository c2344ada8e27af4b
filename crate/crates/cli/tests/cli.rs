use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cci_core::synthetic::{toy_corpus, ToyConfig};
use cci_core::{load_preprocessed, preprocess, write_jsonl, SplitStats};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn cci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cci")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes preprocessed toy splits into `dir`.
fn toy_splits(dir: &Path) -> (PathBuf, PathBuf) {
    let c = toy_corpus(ToyConfig { n_train: 64, n_valid: 24, seed: 5 });
    let train = dir.join("train.jsonl");
    let valid = dir.join("valid.jsonl");
    write_jsonl(&train, &preprocess(&c.train)).unwrap();
    write_jsonl(&valid, &preprocess(&c.valid)).unwrap();
    (train, valid)
}

const SMALL: [&str; 8] = ["--dim", "8", "--max-len", "64", "--epochs", "3", "--batch-size", "16"];

fn trained_model(dir: &Path) -> (PathBuf, PathBuf) {
    let (train, valid) = toy_splits(dir);
    let model = dir.join("model.bin");
    let mut args = vec!["train", "--train", s(&train), "--valid", s(&valid), "--out", s(&model)];
    args.extend(SMALL);
    let o = cci(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    (model, valid)
}

#[test]
fn preprocess_four_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pre.jsonl");
    let o = cci(&["preprocess", "--input", s(&fixture("four.jsonl")), "--output", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains('4'));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.ends_with('\n'));
    assert_eq!(load_preprocessed(&out).unwrap().len(), 4);
}

#[test]
fn preprocess_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        assert!(cci(&["preprocess", "--input", s(&fixture("four.jsonl")), "--output", s(out)]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn preprocess_reports_malformed_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("four.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "{\"id\": \"broken\", \"comment\":";
    let input = dir.path().join("bad.jsonl");
    std::fs::write(&input, lines.join("\n")).unwrap();
    let o = cci(&["preprocess", "--input", s(&input), "--output", s(&dir.path().join("out.jsonl"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn preprocess_missing_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = cci(&["preprocess", "--input", s(&dir.path().join("nope.jsonl")), "--output", s(&dir.path().join("o"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nope.jsonl"));
}

#[test]
fn unknown_flag_is_rejected() {
    let o = cci(&["preprocess", "--input", "a", "--output", "b", "--fast"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--fast"));
}

#[test]
fn train_rejects_zero_tau_before_reading_data() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let model = dir.path().join("m.bin");
    let o = cci(&["train", "--train", s(&missing), "--valid", s(&missing), "--out", s(&model), "--tau", "0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("tau"), "{}", stderr(&o));
    assert!(!model.exists());
}

#[test]
fn train_writes_checkpoint_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = trained_model(dir.path());
    assert!(model.exists());
    let log = std::fs::read_to_string(dir.path().join("model.bin.log.jsonl")).unwrap();
    for line in log.lines() {
        serde_json::from_str::<Value>(line).unwrap();
    }
}

#[test]
fn train_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (train, valid) = toy_splits(dir.path());
    let digest = |name: &str, seed: &str| {
        let model = dir.path().join(name);
        let mut args = vec!["train", "--train", s(&train), "--valid", s(&valid), "--out", s(&model), "--seed", seed];
        args.extend(SMALL);
        assert!(cci(&args).status.success());
        Sha256::digest(std::fs::read(&model).unwrap())
    };
    let a = digest("a.bin", "11");
    assert_eq!(a, digest("b.bin", "11"));
    assert_ne!(a, digest("c.bin", "12"));
}

#[test]
fn attention_flag_takes_a_value() {
    let dir = tempfile::tempdir().unwrap();
    let (train, valid) = toy_splits(dir.path());
    let model = dir.path().join("m.bin");
    let mut args = vec!["train", "--train", s(&train), "--valid", s(&valid), "--out", s(&model), "--attention", "false"];
    args.extend(SMALL);
    assert!(cci(&args).status.success());
    let bytes = std::fs::read(&model).unwrap();
    assert!(String::from_utf8_lossy(&bytes).contains("\nattention false\n"));
}

#[test]
fn eval_full_and_subset() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = trained_model(dir.path());
    let test = dir.path().join("test.jsonl");
    assert!(cci(&["preprocess", "--input", s(&fixture("four.jsonl")), "--output", s(&test)]).status.success());
    let ids = dir.path().join("ids.txt");
    std::fs::write(&ids, "test-01\ntest-03\n").unwrap();
    let o = cci(&["eval", "--model", s(&model), "--test", s(&test), "--subset", s(&ids)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("F1"));

    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.bin.eval.json")).unwrap()).unwrap();
    let rows = report["full"]["rows"].as_array().unwrap();
    assert_eq!(rows.last().unwrap()["name"], "All");
    assert_eq!(rows.last().unwrap()["count"], 4);
    for row in rows {
        for key in ["accuracy", "precision", "recall", "f1"] {
            assert!(row["scores"][key].is_f64());
        }
    }
    let sub = report["subset"]["rows"].as_array().unwrap();
    assert_eq!(sub.last().unwrap()["count"], 2);
}

#[test]
fn eval_lists_missing_subset_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (model, valid) = trained_model(dir.path());
    let ids = dir.path().join("ids.txt");
    std::fs::write(&ids, "ghost-1\nghost-2\n").unwrap();
    let o = cci(&["eval", "--model", s(&model), "--test", s(&valid), "--subset", s(&ids)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ghost-1") && stderr(&o).contains("ghost-2"));
}

#[test]
fn higher_threshold_never_raises_recall() {
    let dir = tempfile::tempdir().unwrap();
    let (model, valid) = trained_model(dir.path());
    let recall_and_positives = |t: &str| {
        assert!(cci(&["eval", "--model", s(&model), "--test", s(&valid), "--threshold", t]).status.success());
        let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.bin.eval.json")).unwrap()).unwrap();
        let all = r["full"]["rows"].as_array().unwrap().last().unwrap().clone();
        let c = &all["confusion"];
        (all["scores"]["recall"].as_f64().unwrap(), c["tp"].as_u64().unwrap() + c["fp"].as_u64().unwrap())
    };
    let (r5, n5) = recall_and_positives("0.5");
    let (r9, n9) = recall_and_positives("0.9");
    assert!(r9 <= r5);
    assert!(n9 <= n5);
}

#[test]
fn detect_identical_files_is_all_keep() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = trained_model(dir.path());
    let old = fixture("websocket_old.java");
    let o = cci(&["detect", "--model", s(&model), "--old-file", s(&old), "--new-file", s(&old), "--comment", "@param request the request"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let p = v["probability"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert!(["consistent", "inconsistent"].contains(&v["verdict"].as_str().unwrap()));
    let tags: Vec<&str> = v["tagged_diff"].as_str().unwrap().split(' ').filter(|t| t.starts_with('<') && t.ends_with('>')).collect();
    assert_eq!(tags, ["<Keep>", "<EndKeep>"]);
}

#[test]
fn detect_reports_the_replaced_type() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = trained_model(dir.path());
    let o = cci(&[
        "detect",
        "--model",
        s(&model),
        "--old-file",
        s(&fixture("websocket_old.java")),
        "--new-file",
        s(&fixture("websocket_new.java")),
        "--comment",
        "@param request the HttpServletRequest to inspect",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let diff = v["tagged_diff"].as_str().unwrap();
    assert!(diff.contains("<ReplaceOld> HttpServletRequest <ReplaceNew> AtmosphereRequest <EndReplace>"), "{diff}");
}

#[test]
fn detect_rejects_empty_comment_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = trained_model(dir.path());
    let old = fixture("websocket_old.java");
    let o = cci(&["detect", "--model", s(&model), "--old-file", s(&old), "--new-file", s(&old), "--comment", "  "]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("comment"));
    let gone = dir.path().join("gone.java");
    let o = cci(&["detect", "--model", s(&model), "--old-file", s(&gone), "--new-file", s(&old), "--comment", "x"]);
    assert!(!o.status.success());
    let o = cci(&["detect", "--model", s(&gone), "--old-file", s(&old), "--new-file", s(&old), "--comment", "x"]);
    assert!(!o.status.success());
}

#[test]
fn stats_json_round_trips() {
    let o = cci(&["stats", "--test", s(&fixture("four.jsonl")), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stats: SplitStats = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(stats.all.test, 4);
    assert_eq!(stats.all.train, 0);
    let o = cci(&["stats", "--test", s(&fixture("four.jsonl"))]);
    assert!(stdout(&o).contains("All"));
    assert!(!cci(&["stats"]).status.success());
}
