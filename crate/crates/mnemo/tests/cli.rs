//! End-to-end checks of the command-line surface, driving the built binary.

use std::path::Path;
use std::process::Command;

fn mnemo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mnemo"))
}

fn run_ok(cmd: &mut Command) -> String {
    let output = cmd.output().expect("binary runs");
    assert!(
        output.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&output.stderr),
        String::from_utf8_lossy(&output.stdout)
    );
    String::from_utf8(output.stdout).expect("utf8 output")
}

#[test]
fn plan_prints_reference_numbers() {
    let out = run_ok(mnemo().arg("plan"));
    let plan: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(plan["cache_bytes"], 2_200_000_000_000u64);
    assert_eq!(plan["buffered_files"], 220_000);
    assert_eq!(plan["streams_per_server"], 10);
    assert_eq!(plan["supported_users"], 10_000);
}

#[test]
fn plan_accepts_size_suffixes() {
    let out = run_ok(mnemo().args(["plan", "--mem-per-machine", "40GB", "--hdd-per-machine", "100GB"]));
    let plan: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(plan["cache_bytes"], 1_400_000_000_000u64);
}

#[test]
fn ingest_query_approx_share_a_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let data_str = data_dir.to_str().unwrap();

    for seed in ["1", "2", "3"] {
        run_ok(mnemo().args(["ingest", "--synthetic-seed", seed, "--data-dir", data_str]));
    }
    // Records persisted as JSON Lines; objects written through the backend.
    let records = std::fs::read_to_string(data_dir.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 3);
    assert!(data_dir.join("objects/videos").is_dir());

    let out = run_ok(mnemo().args([
        "query",
        "--predicate",
        r#"{"location":"living room"}"#,
        "--data-dir",
        data_str,
    ]));
    assert_eq!(out.lines().count(), 3);

    let out = run_ok(mnemo().args([
        "approx",
        "--predicate",
        r#"{"location":"living room"}"#,
        "--rate",
        "1.0",
        "--seed",
        "9",
        "--data-dir",
        data_str,
    ]));
    let answer: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(answer["estimate"], 3.0);
    assert_eq!(answer["standard_error"], 0.0);
}

#[test]
fn ingest_from_stream_file_with_frame_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("frame0.bin"), [1u8, 2, 3]).unwrap();
    let stream_path = dir.path().join("stream.jsonl");
    std::fs::write(
        &stream_path,
        concat!(
            "{\"session_id\":\"file-1\",\"user_id\":\"u\",\"start_timestamp\":100,",
            "\"duration\":4.0,\"location\":\"office\"}\n",
            "{\"offset\":0.0,\"file\":\"frame0.bin\"}\n",
            "{\"offset\":2.5,\"bytes\":\"0aff\"}\n"
        ),
    )
    .unwrap();
    let data_dir = dir.path().join("data");
    let out = run_ok(mnemo().args([
        "ingest",
        "--stream",
        stream_path.to_str().unwrap(),
        "--data-dir",
        data_dir.to_str().unwrap(),
    ]));
    let record: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(record["session_id"], "file-1");
    assert_eq!(record["location"], "office");
    assert!(!record["labels"].as_array().unwrap().is_empty());
}

#[test]
fn duplicate_ingest_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let data_str = dir.path().to_str().unwrap();
    run_ok(mnemo().args(["ingest", "--synthetic-seed", "5", "--data-dir", data_str]));
    let output = mnemo()
        .args(["ingest", "--synthetic-seed", "5", "--data-dir", data_str])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("already present"));
}

#[test]
fn simulate_round_trips_trace_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("cfg.toml");
    std::fs::write(&config_path, "seed = 42\n\n[workload]\ndays = 2\n").unwrap();
    let cfg = config_path.to_str().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let json_a = dir.path().join("a.json");
    let json_b = dir.path().join("b.json");
    let csv_a = dir.path().join("a.csv");

    run_ok(mnemo().args([
        "simulate", "--config", cfg, "--strategy", "time-period",
        "--trace-out", trace.to_str().unwrap(),
        "--out", json_a.to_str().unwrap(),
        "--csv", csv_a.to_str().unwrap(),
    ]));
    // Replaying the saved trace reproduces the report byte for byte.
    run_ok(mnemo().args([
        "simulate", "--config", cfg, "--strategy", "time-period",
        "--trace-in", trace.to_str().unwrap(),
        "--out", json_b.to_str().unwrap(),
    ]));
    assert_eq!(read(&json_a), read(&json_b));
    let csv = std::fs::read_to_string(&csv_a).unwrap();
    assert!(csv.starts_with("strategy,allocator,"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn bench_subcommands_print_summaries() {
    let out = run_ok(mnemo().args(["bench-alloc", "--writes", "50"]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(report["latency_ratio"].as_f64().unwrap() > 1.0);

    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("cfg.toml");
    std::fs::write(&config_path, "seed = 42\n\n[workload]\ndays = 2\n").unwrap();
    let csv_path = dir.path().join("bench.csv");
    let out = run_ok(mnemo().args([
        "bench-prefetch",
        "--config", config_path.to_str().unwrap(),
        "--strategies", "none,time-period",
        "--print-plans",
        "--csv", csv_path.to_str().unwrap(),
    ]));
    assert!(out.contains("none"));
    assert!(out.contains("time-period"));
    assert!(out.contains("\"candidates\""), "plan JSON printed");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().count(), 3); // header + two strategies
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}
