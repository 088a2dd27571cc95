use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use webnav::harness::{parse_report_csv, parse_report_json, OVERALL};

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demo")
}

fn webnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_webnav"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn demo_suite_runs_and_writes_outputs() {
    let out = tempfile::tempdir().unwrap();
    let tasks = demo().join("tasks.jsonl");
    let llm = format!("scripted:{}", path(&demo().join("scripts")));
    let o = webnav(&[
        "run",
        "--tasks",
        path(&tasks),
        "--llm",
        &llm,
        "--out",
        path(out.path()),
        "--report",
        "json",
        "--concurrency",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = parse_report_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let overall = metrics.overall().unwrap();
    assert_eq!(overall.tasks, 3);
    assert!((overall.success_pct - 66.7).abs() < 0.1, "{overall:?}");
    for id in ["soccer-leagues", "salmon-recipe", "teams-price"] {
        assert!(
            out.path()
                .join("traces")
                .join(format!("{id}.jsonl"))
                .is_file(),
            "{id}"
        );
    }
    let records = std::fs::read_to_string(out.path().join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 3);
    let written = std::fs::read_to_string(out.path().join("report.json")).unwrap();
    assert_eq!(parse_report_json(&written).unwrap(), metrics);
}

#[test]
fn single_task_with_csv_report() {
    let out = tempfile::tempdir().unwrap();
    let script = demo().join("scripts").join("soccer-leagues.jsonl");
    let llm = format!("scripted:{}", path(&script));
    let o = webnav(&[
        "run",
        "--task",
        "List the soccer leagues offered in the Soccer menu.",
        "--site",
        "popup-menu",
        "--llm",
        &llm,
        "--out",
        path(out.path()),
        "--report",
        "csv",
    ]);
    assert!(o.status.success());
    let metrics = parse_report_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(metrics.site(OVERALL).unwrap().success_pct, 100.0);
    assert!(metrics.site("popup-menu").is_some());
    assert!(out.path().join("traces/task.jsonl").is_file());
}

#[test]
fn task_failures_are_data_not_exit_codes() {
    let out = tempfile::tempdir().unwrap();
    let missing = out.path().join("no-scripts");
    let llm = format!("scripted:{}", path(&missing));
    let tasks = demo().join("tasks.jsonl");
    let o = webnav(&[
        "run",
        "--tasks",
        path(&tasks),
        "--llm",
        &llm,
        "--out",
        path(out.path()),
    ]);
    assert!(o.status.success());
    let records = std::fs::read_to_string(out.path().join("records.jsonl")).unwrap();
    assert!(
        records
            .lines()
            .all(|l| l.contains("self_aware_failure") && l.contains("\"error\"")),
        "{records}"
    );
}

#[test]
fn browser_backend_rejects_simulated_starts_per_task() {
    let out = tempfile::tempdir().unwrap();
    let tasks = demo().join("tasks.jsonl");
    let llm = format!("scripted:{}", path(&demo().join("scripts")));
    let o = webnav(&[
        "run",
        "--tasks",
        path(&tasks),
        "--llm",
        &llm,
        "--backend",
        "browser",
        "--out",
        path(out.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(out.path().join("records.jsonl")).unwrap();
    assert!(records.contains("needs a URL start"), "{records}");
}

#[test]
fn harness_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("tasks.jsonl");
    std::fs::write(&bad, "{not json}\n").unwrap();
    let o = webnav(&[
        "run",
        "--tasks",
        path(&bad),
        "--llm",
        "scripted:x",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("task suite line 1"));

    let o = webnav(&[
        "run",
        "--tasks",
        path(&dir.path().join("absent.jsonl")),
        "--llm",
        "scripted:x",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read"));

    let o = webnav(&["run", "--tasks", path(&bad), "--llm", "gpt"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn http_backend_needs_the_key_variable() {
    let o = Command::new(env!("CARGO_BIN_EXE_webnav"))
        .args([
            "run",
            "--task",
            "x",
            "--site",
            "popup-menu",
            "--llm",
            "http",
        ])
        .env_remove("LLM_API_KEY")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("LLM_API_KEY"));
}

#[test]
fn sites_lists_the_shipped_fixtures() {
    let o = webnav(&["sites"]);
    let names = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = names.lines().collect();
    assert_eq!(
        names,
        [
            "popup-menu",
            "search-site",
            "flight-widget",
            "pricing-site",
            "noisy-3000"
        ]
    );
}
