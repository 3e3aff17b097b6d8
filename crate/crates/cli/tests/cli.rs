use std::io::Cursor;
use std::path::PathBuf;

use serde_json::Value;
use sqlclarify_cli::{run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

const RUNNING: &str = "How many drivers born after the end of the Vietnam War have been ranked 2?";

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn scripted(key: &str) -> Option<String> {
    (key == "AMBI_SCRIPT_PATH").then(|| fixtures().join("scripts/pipeline.json").display().to_string())
}

fn no_env(_: &str) -> Option<String> {
    None
}

fn invoke(args: &[&str], env: &dyn Fn(&str) -> Option<String>, stdin: &str) -> (i32, String, String) {
    let db_dir = fixtures().join("databases").display().to_string();
    let mut full = vec!["sqlclarify".to_string(), "--db-dir".into(), db_dir];
    full.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(&full, env, &mut Cursor::new(stdin.as_bytes().to_vec()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn usage_errors_exit_two() {
    let (code, _, err) = invoke(&["frobnicate"], &no_env, "");
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("frobnicate"));
    let (code, _, _) = invoke(&["detect", "q"], &no_env, "");
    assert_eq!(code, EXIT_USAGE);
    let (code, out, _) = invoke(&["--help"], &no_env, "");
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("interactive"));
}

#[test]
fn missing_backend_config_is_operational_error() {
    let (code, _, err) = invoke(&["detect", RUNNING, "--db", "formula_1"], &no_env, "");
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("AMBI_LLM_MODE"), "{err}");
}

#[test]
fn detect_json_lists_both_phrases() {
    let (code, out, err) = invoke(&["detect", RUNNING, "--db", "formula_1", "--format", "json"], &scripted, "");
    assert_eq!(code, EXIT_OK, "{err}");
    let found: Value = serde_json::from_str(&out).unwrap();
    let phrases: Vec<&str> = found.as_array().unwrap().iter().map(|a| a["phrase"].as_str().unwrap()).collect();
    assert_eq!(phrases, ["end of the Vietnam War", "ranked 2"]);
}

#[test]
fn interactive_session_prints_rewrite_and_sql() {
    let (code, out, err) = invoke(
        &["interactive", RUNNING, "--db", "formula_1"],
        &scripted,
        "Z\nB\nb\ndrivers need to be German\n\n",
    );
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("pick one of: A, B, C"));
    assert!(out.contains("Rewritten question: How many drivers born after 1975-04-30"));
    assert!(out.contains("T1.nationality = 'German'"));
}

#[test]
fn interactive_input_closed_fails() {
    let (code, _, err) = invoke(&["interactive", RUNNING, "--db", "formula_1"], &scripted, "B\n");
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("input closed"), "{err}");
}

#[test]
fn compare_files_with_execution() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.sql");
    let gold = dir.path().join("gold.sql");
    std::fs::write(&pred, "select name from races where year = 2006.0;").unwrap();
    std::fs::write(&gold, "SELECT name FROM races WHERE year = 2006").unwrap();
    let (code, out, err) = invoke(
        &["compare", pred.to_str().unwrap(), gold.to_str().unwrap(), "--exec", "formula_1"],
        &no_env,
        "",
    );
    assert_eq!(code, EXIT_OK, "{err}");
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["exact"], true);
    assert_eq!(report["execution"], true);

    let (code, _, err) = invoke(&["compare", "/nonexistent.sql", gold.to_str().unwrap()], &no_env, "");
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("/nonexistent.sql"));
}

#[test]
fn eval_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("report.json");
    let dataset = fixtures().join("cases.jsonl").display().to_string();
    let (code, out, err) = invoke(
        &["eval", &dataset, "--with-disambiguation", "--output", output.to_str().unwrap()],
        &scripted,
        "",
    );
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("overall        8/8"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    assert_eq!(report["exact_match_accuracy"]["overall"]["correct"], 8);
}
