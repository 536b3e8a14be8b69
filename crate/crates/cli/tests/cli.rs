use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FWNO: &str = env!("CARGO_BIN_EXE_fwno");
const STUB: &str = env!("CARGO_BIN_EXE_fwno-stub-evaluator");

const TABULAR: &str = r#"{
  "search_space": {"wavelets": ["w0", "w1"], "activations": ["a0", "a1"], "n_blocks": 1},
  "training": {"iterations": 200, "batch_size": 4, "seed": 1},
  "evaluator": {
    "kind": "tabular",
    "table": {"w0/a0": 1.0, "w0/a1": 2.0, "w1/a0": 3.0, "w1/a1": 4.0}
  }
}
"#;

fn fwno(args: &[&str]) -> Output {
    Command::new(FWNO).args(args).env_remove("FWNO_OUTPUT_ROOT").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn train(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    fwno(&args)
}

fn external_config(stub_args: &[&str], extra: &str) -> String {
    let args: Vec<String> = stub_args.iter().map(|a| format!("{a:?}")).collect();
    format!(
        r#"{{
  "search_space": {{"wavelets": ["db6", "sym6"], "activations": ["gelu", "tanh"], "n_blocks": 2}},
  "training": {{"iterations": 20, "batch_size": 2, "seed": 5}},
  "evaluator": {{"kind": "external", "command": {STUB:?}, "args": [{}], "budget": {{"epochs": 20}}{extra}}}
}}
"#,
        args.join(", ")
    )
}

#[test]
fn train_writes_a_complete_run_directory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "cfg.json", TABULAR);
    let run = tmp.path().join("run");
    let v = stdout_json(&train(&cfg, &run, &[]));
    assert_eq!(v["best"], "w1/a1");
    assert_eq!(v["reward"], 4.0);
    for f in ["config.json", "run.jsonl", "checkpoint.json", "summary.json", "evaluator_log.jsonl"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let records = std::fs::read_to_string(run.join("run.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 800);
    let first: Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    for key in ["iteration", "architecture", "reward", "loss", "wall_time_s"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    let summary: Value = serde_json::from_slice(&std::fs::read(run.join("summary.json")).unwrap()).unwrap();
    assert!(summary["version"].as_str().unwrap().starts_with("fwno "));
    assert_eq!(summary["config"]["training"]["seed"], 1);
    assert!(summary["evaluator_calls"].as_u64().unwrap() <= 4);
}

#[test]
fn seed_override_reproduces_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "cfg.json", TABULAR);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    stdout_json(&train(&cfg, &a, &["--seed", "77"]));
    stdout_json(&train(&cfg, &b, &["--seed", "77"]));
    stdout_json(&train(&cfg, &c, &["--seed", "78"]));
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "summary.json"), read(&b, "summary.json"));
    assert_eq!(read(&a, "checkpoint.json"), read(&b, "checkpoint.json"));
    assert_ne!(read(&a, "checkpoint.json"), read(&c, "checkpoint.json"));

    // train -> sample -> oracle is reproducible
    let ck_a = a.join("checkpoint.json");
    let ck_b = b.join("checkpoint.json");
    let sa = fwno(&["sample", "--checkpoint", ck_a.to_str().unwrap(), "--count", "1000", "--seed", "3"]);
    let sb = fwno(&["sample", "--checkpoint", ck_b.to_str().unwrap(), "--count", "1000", "--seed", "3"]);
    assert_eq!(sa.stdout, sb.stdout);
    let oa = fwno(&["oracle", "--config", cfg.to_str().unwrap(), "--checkpoint", ck_a.to_str().unwrap()]);
    let ob = fwno(&["oracle", "--config", cfg.to_str().unwrap(), "--checkpoint", ck_b.to_str().unwrap()]);
    assert_eq!(oa.stdout, ob.stdout);
    assert!(stdout_json(&oa)["tv_policy"].as_f64().is_some());
}

#[test]
fn invalid_configs_exit_2_with_line() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        TABULAR.replace(r#""wavelets": ["w0", "w1"], "#, ""),
        TABULAR.replace(r#""seed": 1"#, r#""seed": 1, "momentum": 0.9"#),
        TABULAR.replace(r#""batch_size": 4"#, r#""batch_size": 0"#),
        TABULAR.replace("4.0", "0.0"),
        "{ not json".to_string(),
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write(tmp.path(), &format!("bad{i}.json"), text);
        let out = train(&cfg, &tmp.path().join(format!("run{i}")), &[]);
        assert_eq!(out.status.code(), Some(2), "case {i}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("line"), "case {i}: {err}");
    }
}

#[test]
fn report_of_one_iteration_has_one_row() {
    let tmp = TempDir::new().unwrap();
    let text = TABULAR.replace(r#""iterations": 200, "batch_size": 4"#, r#""iterations": 1, "batch_size": 1"#);
    let cfg = write(tmp.path(), "cfg.json", &text);
    let run = tmp.path().join("run");
    stdout_json(&train(&cfg, &run, &[]));
    let out = fwno(&["report", "--run", run.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "rank,architecture,visits,best_reward,last_reward");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("1,w"));
}

#[test]
fn report_ranks_by_reward() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "cfg.json", TABULAR);
    let run = tmp.path().join("run");
    stdout_json(&train(&cfg, &run, &[]));
    let csv = String::from_utf8(fwno(&["report", "--run", run.to_str().unwrap()]).stdout).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][1], "w1/a1");
    let best: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(best, vec![4.0, 3.0, 2.0, 1.0]);
}

#[test]
fn oracle_on_uniform_rewards_is_uniform() {
    let tmp = TempDir::new().unwrap();
    let text = TABULAR.replace("2.0", "1.0").replace("3.0", "1.0").replace("4.0", "1.0");
    let cfg = write(tmp.path(), "cfg.json", &text);
    let v = stdout_json(&fwno(&["oracle", "--config", cfg.to_str().unwrap()]));
    let p: Vec<f64> = v["terminals"].as_array().unwrap().iter().map(|t| t["exact_probability"].as_f64().unwrap()).collect();
    assert_eq!(p, vec![0.25; 4]);
    assert!(v.get("tv_policy").is_none());
}

#[test]
fn oracle_cap_exits_5() {
    let tmp = TempDir::new().unwrap();
    let ids = |p: &str| (0..10).map(|i| format!("\"{p}{i}\"")).collect::<Vec<_>>().join(",");
    let ones = format!("[{}]", vec!["1"; 10].join(","));
    let text = format!(
        r#"{{"search_space": {{"wavelets": [{}], "activations": [{}], "n_blocks": 4}},
"evaluator": {{"kind": "synthetic", "weights": [{}]}}}}"#,
        ids("w"),
        ids("a"),
        vec![ones; 8].join(",")
    );
    let cfg = write(tmp.path(), "cfg.json", &text);
    let out = fwno(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn corrupt_checkpoint_exits_4() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "cfg.json", TABULAR);
    let run = tmp.path().join("run");
    stdout_json(&train(&cfg, &run, &[]));
    let ckpt = run.join("checkpoint.json");
    let text = std::fs::read_to_string(&ckpt).unwrap();
    let broken = write(tmp.path(), "broken.json", &text[..text.len() / 3]);
    let out = fwno(&["sample", "--checkpoint", broken.to_str().unwrap(), "--count", "10"]);
    assert_eq!(out.status.code(), Some(4));
    let out = fwno(&["oracle", "--config", cfg.to_str().unwrap(), "--checkpoint", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let missing = tmp.path().join("nope.json");
    let out = fwno(&["sample", "--checkpoint", missing.to_str().unwrap(), "--count", "10"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sample_reports_frequencies_and_tv() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "cfg.json", TABULAR);
    let run = tmp.path().join("run");
    stdout_json(&train(&cfg, &run, &[]));
    let ckpt = run.join("checkpoint.json");
    let v = stdout_json(&fwno(&["sample", "--checkpoint", ckpt.to_str().unwrap(), "--count", "1"]));
    assert_eq!(v["samples"].as_array().unwrap().len(), 1);
    assert_eq!(v["samples"][0]["frequency"], 1.0);
    let v = stdout_json(&fwno(&["sample", "--checkpoint", ckpt.to_str().unwrap(), "--count", "5000"]));
    let total: f64 = v["samples"].as_array().unwrap().iter().map(|s| s["frequency"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(v["tv_vs_oracle"].as_f64().unwrap() <= 1.0);
}

#[test]
fn output_root_env_reroots_relative_dirs() {
    let tmp = TempDir::new().unwrap();
    let text = TABULAR.replace(r#""evaluator""#, r#""output_dir": "rel/run", "evaluator""#);
    let cfg = write(tmp.path(), "cfg.json", &text);
    let out = Command::new(FWNO)
        .args(["train", "--config", cfg.to_str().unwrap(), "--quiet"])
        .env("FWNO_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("rel/run/summary.json").is_file());
}

#[test]
fn external_evaluator_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "cfg.json", &external_config(&["--log-requests"], ""));
    let run = tmp.path().join("run");
    let v = stdout_json(&train(&cfg, &run, &[]));
    assert!(v["reward"].as_f64().unwrap() > 0.9);
    let summary: Value = serde_json::from_slice(&std::fs::read(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reward_cache"], true);
    let distinct = summary["visits"].as_array().unwrap().len() as u64;
    assert_eq!(summary["evaluator_calls"].as_u64().unwrap(), distinct);
    let logs = std::fs::read_to_string(run.join("evaluator_log.jsonl")).unwrap();
    assert_eq!(logs.lines().count() as u64, distinct);

    // a second run against the same deterministic evaluator gives the same summary
    let run2 = tmp.path().join("run2");
    stdout_json(&train(&cfg, &run2, &[]));
    assert_eq!(std::fs::read(run.join("summary.json")).unwrap(), std::fs::read(run2.join("summary.json")).unwrap());

    // an external oracle enumerates all 16 terminals
    let v = stdout_json(&fwno(&["oracle", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["terminals"].as_array().unwrap().len(), 16);
}

#[test]
fn nondeterministic_evaluator_disables_cache() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "cfg.json", &external_config(&["--nondeterministic"], ""));
    let run = tmp.path().join("run");
    stdout_json(&train(&cfg, &run, &[]));
    let summary: Value = serde_json::from_slice(&std::fs::read(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reward_cache"], false);
    assert_eq!(summary["evaluator_calls"], 40);
    let out = fwno(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let forced = write(tmp.path(), "forced.json", &external_config(&["--nondeterministic"], r#", "cache": true"#));
    let run = tmp.path().join("forced");
    stdout_json(&train(&forced, &run, &[]));
    let summary: Value = serde_json::from_slice(&std::fs::read(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reward_cache"], true);
}

#[test]
fn evaluator_failures_exit_3() {
    let tmp = TempDir::new().unwrap();
    let cases: [(&str, &[&str], &str); 4] = [
        ("failing", &["--fail-every", "2"], ""),
        ("inconsistent", &["--inconsistent"], ""),
        ("hanging", &["--hang-after", "0"], r#", "timeout_s": 0.2, "retries": 1"#),
        ("unknown-wavelet", &[], ""),
    ];
    for (name, stub_args, extra) in cases {
        let mut text = external_config(stub_args, extra);
        if name == "unknown-wavelet" {
            text = text.replace("sym6", "morlet");
        }
        let cfg = write(tmp.path(), &format!("{name}.json"), &text);
        let out = train(&cfg, &tmp.path().join(name), &[]);
        assert_eq!(out.status.code(), Some(3), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        // every attempted iteration is on record
        let log = std::fs::read_to_string(tmp.path().join(name).join("run.jsonl")).unwrap();
        assert!(log.lines().any(|l| l.contains("\"error\"")), "{name}");
    }
}

#[test]
fn occasional_failures_are_skipped() {
    let tmp = TempDir::new().unwrap();
    // 1 of every 25 requests fails: below the 10% skip limit
    let text = external_config(&["--nondeterministic", "--fail-every", "25"], "").replace(r#""iterations": 20, "batch_size": 2"#, r#""iterations": 100, "batch_size": 1"#);
    let cfg = write(tmp.path(), "cfg.json", &text);
    let run = tmp.path().join("run");
    let v = stdout_json(&train(&cfg, &run, &[]));
    assert_eq!(v["skipped_iterations"], 4);
    assert_eq!(v["iterations"], 100);
}

#[test]
fn missing_evaluator_command_exits_3() {
    let tmp = TempDir::new().unwrap();
    let text = external_config(&[], "").replace(&format!("{STUB:?}"), "\"/nonexistent/evaluator\"");
    let cfg = write(tmp.path(), "cfg.json", &text);
    let out = train(&cfg, &tmp.path().join("run"), &[]);
    assert_eq!(out.status.code(), Some(3));
}
