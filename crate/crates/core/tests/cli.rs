mod common;

use common::{corpus_dir, corpus_text};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn slp() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_slp"));
    c.env_remove("SLP_STATE_CAP").env_remove("SLP_TIMINGS");
    c
}

fn corpus_path(name: &str) -> PathBuf {
    corpus_dir().join(name)
}

fn run(args: &[&str]) -> Output {
    slp().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn clean_model_exits_zero() {
    let out = run(&["check", corpus_path("heater.slp").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).ends_with("total: 20, discharged: 20, violated: 0, skipped: 0\n"));
}

#[test]
fn violation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = corpus_text("heater.slp").replace("t + Delta & h'", "t + Delta + 100 & h'");
    let f = write(dir.path(), "m.slp", &text);
    let out = run(&["check", &f]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    let line = text.lines().find(|l| l.starts_with("temp_sensor.refines.REF_GRT ")).unwrap();
    assert!(line.contains(" violated  ["), "{line}");
}

#[test]
fn syntax_error_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.slp", "MODEL m VARIABLES x INVARIANTS i: x : PROCESS p END");
    let out = run(&["check", &f]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.slp:"));
}

#[test]
fn validation_error_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "m.slp", "MODEL m VARIABLES x INVARIANTS i: x : 0..3");
    assert_eq!(code(&run(&["parse", &f])), 2);
}

#[test]
fn missing_file_and_bad_flags_exit_two() {
    assert_eq!(code(&run(&["check", "/nonexistent/model.slp"])), 2);
    assert_eq!(code(&run(&["check", "--ref-mode", "both", "x.slp"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn state_cap_exits_three() {
    let out = slp()
        .env("SLP_STATE_CAP", "10")
        .args(["check", corpus_path("gcd0.slp").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "{}", stdout(&out));
    assert!(stdout(&out).contains("skipped"));
}

#[test]
fn unsupported_export_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["export-smt", corpus_path("asserts.slp").to_str().unwrap(), "--smt", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(dir.path().join("chained.body_s2.ASN.smt2").exists());
    assert!(!dir.path().join("chained.body_s0.WD.smt2").exists());
}

#[test]
fn json_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = corpus_path("heater.slp");
    let model = model.to_str().unwrap();
    let mut outputs = Vec::new();
    for (k, extra) in [&[][..], &[][..], &["--workers", "8"][..]].iter().enumerate() {
        let json = dir.path().join(format!("out{k}.json"));
        let mut args = vec!["check", model, "--json", json.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert_eq!(code(&run(&args)), 0);
        outputs.push(std::fs::read(&json).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let doc: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(doc["summary"]["violated"], 0);
    assert_eq!(doc["pos"].as_array().unwrap().len(), 20);
}

#[test]
fn po_filter_selects_by_glob() {
    let out = run(&["pos", corpus_path("heater.slp").to_str().unwrap(), "--po", "*.CMP"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 4, "{text}");
    assert!(text.lines().all(|l| l.contains(".CMP  CMP  ")));
}

#[test]
fn smt_dir_receives_undischarged_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let text = corpus_text("heater.slp").replace("t + Delta & h'", "t + Delta + 100 & h'");
    let f = write(dir.path(), "m.slp", &text);
    let smt = dir.path().join("smt");
    assert_eq!(code(&run(&["check", &f, "--smt", smt.to_str().unwrap()])), 1);
    let names: Vec<String> =
        std::fs::read_dir(&smt).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(names, vec!["temp_sensor.refines.REF_GRT.smt2".to_string()]);
}

#[test]
fn rw_lists_loop_body_writes() {
    let out = run(&["rw", corpus_path("gcd1b.slp").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.ends_with("{y1, y2}") && l.contains("_do")), "{text}");
    assert!(text.lines().any(|l| l.contains(" fin  {r}")), "{text}");
}

#[test]
fn trace_reports_inclusion_and_divergence() {
    let out = run(&["trace", corpus_path("gcd1b.slp").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "main  inclusion  discharged\nmain  divergence  discharged\n");
}

#[test]
fn trace_mutation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = corpus_text("gcd1b.slp").replace("s1: y1 := y1 - y2", "s1: y1 := y1 + y2");
    let f = write(dir.path(), "m.slp", &text);
    let out = run(&["trace", &f, "--depth", "8"]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
    assert!(stdout(&out).contains("main  inclusion  violated: <"));
}

#[test]
fn corpus_exit_codes() {
    for (name, want) in [("gcd0.slp", 0), ("gcd1a.slp", 0), ("gcd1b.slp", 0), ("heater.slp", 0), ("asserts.slp", 1)] {
        let out = run(&["check", corpus_path(name).to_str().unwrap()]);
        assert_eq!(code(&out), want, "{name}\n{}", stdout(&out));
    }
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("export-smt"));
}
