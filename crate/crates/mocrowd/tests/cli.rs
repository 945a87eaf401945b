use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mocrowd::core::engine::ScenarioConfig;
use mocrowd::{load_config, HypothesisReport};

fn mocrowd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mocrowd")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mocrowd(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("city.json");
    ok(&["example-config", "--workers", "20", "--tasks-per-type", "8", "--seed", "4", "--out", path.to_str().unwrap()]);
    path.to_str().unwrap().to_string()
}

fn error_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.trim()).unwrap_or_else(|e| panic!("{e}: {line}"))
}

#[test]
fn example_config_is_a_valid_scenario() {
    let text = ok(&["example-config"]);
    let cfg: ScenarioConfig = serde_json::from_str(&text).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.world.n_workers, 60);
}

#[test]
fn run_then_learn_locations() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let out = tmp.path().join("run");
    let listed = ok(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(listed.lines().count(), 7);
    assert_eq!(load_config(&out.join("config.json")).unwrap(), load_config(Path::new(&config)).unwrap());

    let csv_path = tmp.path().join("pairs.csv");
    ok(&[
        "learn-locations",
        "--results",
        out.to_str().unwrap(),
        "--k",
        "2",
        "--min-samples",
        "3",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("class,task_type,verdict,confidence,samples,cluster"));
    assert!(lines.count() > 0);
}

#[test]
fn sweep_and_hypotheses_write_their_files() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let out = tmp.path().join("sweep");
    let printed = ok(&[
        "sweep",
        "--config",
        &config,
        "--axis",
        "answers-per-question",
        "--values",
        "1,3",
        "--reps",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(printed.lines().count(), 3);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3);
    assert_eq!(fs::read_to_string(out.join("runs.csv")).unwrap().lines().count(), 1 + 4 * 3);
    assert!(out.join("targets.csv").exists());

    let hyp = tmp.path().join("hyp");
    ok(&["hypotheses", "--config", &config, "--seeds", "2", "--out", hyp.to_str().unwrap()]);
    let report: HypothesisReport = serde_json::from_slice(&fs::read(hyp.join("hypotheses.json")).unwrap()).unwrap();
    assert_eq!(report.seeds.len(), 2);
    assert_eq!(fs::read_to_string(hyp.join("hypotheses.csv")).unwrap().lines().count(), 1 + 3 + 2 + 2);
}

#[test]
fn failures_report_json_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let out = mocrowd(&["run", "--config", missing.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(error_json(&out)["error"], "io");
    assert_eq!(out.status.code(), Some(1));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"world\": 3}").unwrap();
    let out = mocrowd(&["run", "--config", bad.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(error_json(&out)["error"], "json");

    let config = small_config(tmp.path());
    let out = mocrowd(&["sweep", "--config", &config, "--axis", "spammer_ratio", "--values", "1.5", "--out", "x"]);
    assert_eq!(error_json(&out)["error"], "invalid_spec");

    let out = mocrowd(&["sweep", "--config", &config, "--axis", "speed", "--values", "1", "--out", "x"]);
    assert_eq!(error_json(&out)["error"], "usage");
    assert_eq!(out.status.code(), Some(2));
}
