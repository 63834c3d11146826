//! Exit codes, output formats and file handling of the `sdmp` binary.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use sdmp::engine::{AnalyzeReport, BatchReport, SimReport};

const DIAMOND: &str = r#"{
    "nodes": [
        {"id": "s", "kind": "access_point", "bss": "bs", "p": 0.0},
        {"id": "a", "kind": "access_point", "bss": "ba", "p": 0.5},
        {"id": "b", "kind": "access_point", "bss": "bb", "p": 0.5},
        {"id": "t", "kind": "access_point", "bss": "bt", "p": 0.0}
    ],
    "links": [
        {"a": "s", "b": "a"}, {"a": "a", "b": "t"},
        {"a": "s", "b": "b"}, {"a": "b", "b": "t"}
    ]
}"#;

fn scenario_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("sdmp-cli-tests");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn sdmp(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sdmp"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn validate_accepts_a_clean_scenario() {
    let file = scenario_file("valid.json", DIAMOND);
    let (code, stdout, _) = sdmp(&["validate", file.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
}

#[test]
fn validate_lists_violations_and_exits_one() {
    let broken = r#"{
        "nodes": [
            {"id": "ap1", "kind": "access_point", "bss": "b1", "p": 0.0},
            {"id": "ap2", "kind": "access_point", "bss": "b1", "p": 1.5}
        ],
        "links": []
    }"#;
    let file = scenario_file("broken.json", broken);
    let (code, stdout, _) = sdmp(&["validate", file.to_str().unwrap()]);
    assert_eq!(code, 1);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().any(|l| l.starts_with("prob-range")));
    assert!(lines.iter().any(|l| l.starts_with("one-ap-per-bss")));
}

#[test]
fn validate_rejects_malformed_json_with_exit_two() {
    let file = scenario_file("malformed.json", "{ not json");
    let (code, _, stderr) = sdmp(&["validate", file.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("parse"));
}

#[test]
fn paths_prints_ascending_costs_in_all_formats() {
    let file = scenario_file("paths.json", DIAMOND);
    let f = file.to_str().unwrap();
    let (code, text, _) = sdmp(&["paths", f, "--src", "s", "--dst", "t"]);
    assert_eq!(code, 0);
    assert_eq!(
        text.lines().collect::<Vec<_>>(),
        vec!["s -> a -> t  cost 0.5", "s -> b -> t  cost 0.5"]
    );

    let (code, json, _) = sdmp(&["paths", f, "--src", "s", "--dst", "t", "--format", "json"]);
    assert_eq!(code, 0);
    let parsed: Vec<sdmp::engine::PathReport> = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.len(), 2);
    assert_eq!(parsed[0].nodes, vec!["s", "a", "t"]);
    assert_eq!(parsed[0].cost, 0.5);

    let (code, csv, _) = sdmp(&["paths", f, "--src", "s", "--dst", "t", "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(csv.lines().next(), Some("s-a-t,0.5"));

    let (code, capped, _) = sdmp(&["paths", f, "--src", "s", "--dst", "t", "--max", "1"]);
    assert_eq!(code, 0);
    assert_eq!(capped.lines().count(), 1);
}

#[test]
fn paths_exit_one_when_disconnected() {
    let split = r#"{
        "nodes": [
            {"id": "s", "kind": "access_point", "bss": "b1", "p": 0.0},
            {"id": "t", "kind": "access_point", "bss": "b2", "p": 0.0}
        ],
        "links": []
    }"#;
    let file = scenario_file("split.json", split);
    let (code, _, stderr) = sdmp(&["paths", file.to_str().unwrap(), "--src", "s", "--dst", "t"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("no path"));
}

#[test]
fn send_reports_success_and_parses_back() {
    let file = scenario_file("send.json", DIAMOND);
    let (code, stdout, _) = sdmp(&[
        "send",
        file.to_str().unwrap(),
        "--src",
        "s",
        "--dst",
        "t",
        "--parts",
        "2",
        "--seed",
        "2a",
    ]);
    assert_eq!(code, 0);
    let report: SimReport = serde_json::from_str(&stdout).unwrap();
    assert!(report.reconstructed_ok);
    assert_eq!(report.seed, "0x000000000000002a");
}

// Interception is reported, never enforced: the adversary covering both
// paths reads everything, yet delivery succeeds and the exit code stays 0.
#[test]
fn send_succeeds_even_when_the_adversary_wins() {
    let file = scenario_file("send-owned.json", DIAMOND);
    let (code, stdout, _) = sdmp(&[
        "send",
        file.to_str().unwrap(),
        "--src",
        "s",
        "--dst",
        "t",
        "--parts",
        "2",
        "--adversary",
        "fixed:a,b",
    ]);
    assert_eq!(code, 0);
    let report: SimReport = serde_json::from_str(&stdout).unwrap();
    assert!(report.delivered && report.reconstructed_ok);
    assert!(report.leakage.full_reconstruction);
    assert_eq!(report.frames_intercepted, 2);
}

#[test]
fn send_csv_row_has_the_documented_columns() {
    let file = scenario_file("send-csv.json", DIAMOND);
    let (code, stdout, _) = sdmp(&[
        "send",
        file.to_str().unwrap(),
        "--src",
        "s",
        "--dst",
        "t",
        "--parts",
        "2",
        "--adversary",
        "fixed:a",
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0);
    let fields: Vec<&str> = stdout.trim_end().split(',').collect();
    assert_eq!(fields.len(), 15);
    assert_eq!(fields[0], "multipath");
    assert_eq!(fields[4], "true"); // delivered
    assert_eq!(fields[10], "1"); // intercepted combo indices
    assert_eq!(fields[14], "1;2"); // combo assignment
}

#[test]
fn send_writes_a_trace_file() {
    let file = scenario_file("send-trace.json", DIAMOND);
    let trace = std::env::temp_dir().join("sdmp-cli-tests/send.trace");
    let (code, _, _) = sdmp(&[
        "send",
        file.to_str().unwrap(),
        "--src",
        "s",
        "--dst",
        "t",
        "--parts",
        "2",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let body = fs::read_to_string(&trace).unwrap();
    let mut last_time = 0u64;
    let mut kinds = std::collections::BTreeSet::new();
    for line in body.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 6, "line {line:?}");
        let time: u64 = fields[0].parse().unwrap();
        assert!(time >= last_time);
        last_time = time;
        kinds.insert(fields[1].to_owned());
        assert!(fields[4].contains("->"));
    }
    assert_eq!(
        kinds.into_iter().collect::<Vec<_>>(),
        vec!["ARRIVAL", "HOP_END", "HOP_START"]
    );
}

#[test]
fn config_errors_exit_two() {
    let file = scenario_file("config.json", DIAMOND);
    let f = file.to_str().unwrap();

    // unknown endpoint
    let (code, _, _) = sdmp(&["send", f, "--src", "s", "--dst", "nowhere"]);
    assert_eq!(code, 2);

    // unknown adversary node
    let (code, _, _) = sdmp(&["send", f, "--src", "s", "--dst", "t", "--adversary", "fixed:zz"]);
    assert_eq!(code, 2);

    // malformed adversary spec
    let (code, _, _) = sdmp(&["send", f, "--src", "s", "--dst", "t", "--adversary", "everyone"]);
    assert_eq!(code, 2);

    // part count below 2 is a usage error
    let (code, _, _) = sdmp(&["send", f, "--src", "s", "--dst", "t", "--parts", "1"]);
    assert_eq!(code, 2);

    // path count with unipath
    let (code, _, _) = sdmp(&[
        "send", f, "--src", "s", "--dst", "t", "--mode", "unipath", "--path-count", "2",
    ]);
    assert_eq!(code, 2);

    // non-hex seed
    let (code, _, _) = sdmp(&["send", f, "--src", "s", "--dst", "t", "--seed", "zz"]);
    assert_eq!(code, 2);

    // zero path cap
    let (code, _, _) = sdmp(&["paths", f, "--src", "s", "--dst", "t", "--max", "0"]);
    assert_eq!(code, 2);

    // missing file
    let (code, _, _) = sdmp(&["send", "/nonexistent.json", "--src", "s", "--dst", "t"]);
    assert_eq!(code, 2);
}

#[test]
fn send_exit_three_on_delivery_failure() {
    let jammed = r#"{
        "nodes": [
            {"id": "s", "kind": "access_point", "bss": "bs", "p": 0.0},
            {"id": "a", "kind": "access_point", "bss": "ba", "p": 0.0},
            {"id": "b", "kind": "access_point", "bss": "bb", "p": 0.0},
            {"id": "t", "kind": "access_point", "bss": "bt", "p": 0.0}
        ],
        "links": [
            {"a": "s", "b": "a", "latency": 2, "medium": "m"},
            {"a": "a", "b": "t", "latency": 3, "medium": "m"},
            {"a": "s", "b": "b", "latency": 5, "medium": "m"},
            {"a": "b", "b": "t", "latency": 2, "medium": "m"}
        ],
        "mac": {"cw_min": 2, "cw_max": 2, "max_retries": 1}
    }"#;
    let file = scenario_file("jammed.json", jammed);
    let (code, stdout, _) = sdmp(&[
        "send",
        file.to_str().unwrap(),
        "--src",
        "s",
        "--dst",
        "t",
        "--parts",
        "12",
    ]);
    assert_eq!(code, 3);
    let report: SimReport = serde_json::from_str(&stdout).unwrap();
    assert!(!report.delivered);
}

#[test]
fn analyze_output_parses_in_both_formats() {
    let file = scenario_file("analyze.json", DIAMOND);
    let f = file.to_str().unwrap();
    let (code, json, _) = sdmp(&["analyze", f, "--src", "s", "--dst", "t", "--parts", "2"]);
    assert_eq!(code, 0);
    let report: AnalyzeReport = serde_json::from_str(&json).unwrap();
    assert_eq!(report.method, "exact");
    assert!((report.reconstruction_prob - 0.25).abs() < 1e-12);
    assert_eq!(report.stderr, None);

    let (code, csv, _) = sdmp(&[
        "analyze", f, "--src", "s", "--dst", "t", "--parts", "2", "--format", "csv",
    ]);
    assert_eq!(code, 0);
    assert!(csv.starts_with("exact,multipath,2,0x0000000000000000,0.25,,,"));
}

#[test]
fn batch_output_parses_in_both_formats() {
    let file = scenario_file("batch.json", DIAMOND);
    let f = file.to_str().unwrap();
    let (code, json, _) = sdmp(&[
        "batch", f, "--src", "s", "--dst", "t", "--parts", "2", "--adversary", "independent",
        "--trials", "200", "--seed", "7",
    ]);
    assert_eq!(code, 0);
    let report: BatchReport = serde_json::from_str(&json).unwrap();
    assert_eq!(report.trials, 200);
    assert_eq!(report.delivery_rate, 1.0);
    assert!(report.reconstruction_rate > 0.0 && report.reconstruction_rate < 1.0);

    let (code, csv, _) = sdmp(&[
        "batch", f, "--src", "s", "--dst", "t", "--parts", "2", "--adversary", "independent",
        "--trials", "200", "--seed", "7", "--format", "csv",
    ]);
    assert_eq!(code, 0);
    assert_eq!(csv.trim_end().split(',').count(), 10);
    assert!(csv.starts_with("200,multipath,0x0000000000000007,"));
}

#[test]
fn analyze_falls_back_to_monte_carlo_on_large_relay_counts() {
    // 25 parallel single-relay paths exceed the exact enumeration limit.
    let mut nodes = vec![
        r#"{"id": "s", "kind": "access_point", "bss": "bs", "p": 0.0}"#.to_owned(),
        r#"{"id": "t", "kind": "access_point", "bss": "bt", "p": 0.0}"#.to_owned(),
    ];
    let mut links = Vec::new();
    for i in 0..25 {
        nodes.push(format!(
            r#"{{"id": "r{i:02}", "kind": "access_point", "bss": "b{i:02}", "p": 0.2}}"#
        ));
        links.push(format!(r#"{{"a": "s", "b": "r{i:02}"}}"#));
        links.push(format!(r#"{{"a": "r{i:02}", "b": "t"}}"#));
    }
    let scenario = format!(
        r#"{{"nodes": [{}], "links": [{}]}}"#,
        nodes.join(","),
        links.join(",")
    );
    let file = scenario_file("wide.json", &scenario);
    let (code, json, _) = sdmp(&[
        "analyze",
        file.to_str().unwrap(),
        "--src",
        "s",
        "--dst",
        "t",
        "--parts",
        "25",
        "--trials",
        "20000",
        "--seed",
        "5",
    ]);
    assert_eq!(code, 0);
    let report: AnalyzeReport = serde_json::from_str(&json).unwrap();
    assert_eq!(report.method, "monte_carlo");
    assert_eq!(report.trials, Some(20000));
    let stderr = report.stderr.expect("stderr reported");
    // true value: every one of the 25 relays compromised, 0.2^25 ~ 0
    assert!(report.reconstruction_prob <= 3.0 * stderr.max(1e-9));
}
