use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concmtf")).args(args).current_dir(cwd).output().unwrap()
}

fn post(user: &str, ts: i64, tokens: &str) -> String {
    format!("{{\"user\":\"{user}\",\"ts\":{ts},\"tokens\":[{tokens}],\"tags\":[\"t\"]}}\n")
}

#[test]
fn bad_json_line_is_reported_by_number() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{}{}not json\n", post("a", 1, "\"x\""), post("b", 2, "\"y\""));
    std::fs::write(dir.path().join("p.jsonl"), text).unwrap();
    let out = run(&["build", "--input", "p.jsonl", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn rare_malformed_lines_are_skipped_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let mut text: String = (0..200).map(|i| post("u", i, "\"flux\",\"wave\"")).collect();
    text.push_str("{\"user\":\"u\"}\n");
    std::fs::write(dir.path().join("p.jsonl"), text).unwrap();
    let out = run(&["build", "--input", "p.jsonl", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 201"));
    let vocab = std::fs::read_to_string(dir.path().join("o/vocab.tsv")).unwrap();
    assert_eq!(vocab, "0\tflux\t200\n1\twave\t200\n");
}

#[test]
fn empty_input_gives_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.jsonl"), "").unwrap();
    let out = run(&["build", "--input", "p.jsonl", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("o/vocab.tsv")).unwrap(), "");
    let tensor = std::fs::read_to_string(dir.path().join("o/tensor.tsv")).unwrap();
    assert!(tensor.starts_with("#tensor3 0 "));
}

#[test]
fn unknown_config_key_or_flag_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"fit": {"max_iter": 3}}"#).unwrap();
    assert_eq!(run(&["synth", "--config", "c.json", "--out", "s"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["synth", "--bogus", "--out", "s"], dir.path()).status.code(), Some(1));
}

#[test]
fn decompose_then_topics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.json"), r#"{"synth": {"dims": [20, 12, 6, 5]}, "fit": {"max_iters": 400}}"#).unwrap();
    assert_eq!(run(&["synth", "--config", "c.json", "--out", "s"], d).status.code(), Some(0));
    let out = run(&["decompose", "--config", "c.json", "--tensor", "s/tensor.tsv", "--side", "s/side.tsv", "--out", "m"], d);
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    for f in ["A.tsv", "B.tsv", "C.tsv", "D.tsv", "core.tsv", "trace.tsv", "manifest.json"] {
        assert!(d.join("m").join(f).exists(), "{f}");
    }
    assert_eq!(run(&["topics", "--model", "m", "--out", "t"], d).status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("t/report.json")).unwrap()).unwrap();
    assert_eq!(report["components"].as_array().unwrap().len(), 3);

    // one sweep only
    let capped = run(&["decompose", "--tensor", "s/tensor.tsv", "--max-iters", "1", "--out", "m1"], d);
    assert_eq!(capped.status.code(), Some(2));

    std::fs::write(d.join("wrong.tsv"), "#matrix 3 1\n1\n2\n3\n").unwrap();
    let mismatch = run(&["decompose", "--tensor", "s/tensor.tsv", "--side", "wrong.tsv", "--out", "m2"], d);
    assert_eq!(mismatch.status.code(), Some(1));
}

#[test]
fn eval_with_missing_model_dir_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(&["synth", "--out", "s"], d).status.code(), Some(0));
    assert_eq!(run(&["eval", "--instance", "s", "--model", "nope", "--out", "e"], d).status.code(), Some(1));
}
