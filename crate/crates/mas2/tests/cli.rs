use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mas2::formats::{import_preferences, read_trajectories, write_logprobs};
use mas2::harness::RunReport;
use mas2_core::loss::LogProbRecord;

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn mas2(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mas2"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("MAS2_")) {
        cmd.env_remove(k);
    }
    cmd.args(args).output().unwrap()
}

fn text(out: &Output) -> (String, String) {
    (String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_on_demo_tasks_writes_logs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = repo_file("configs/demo-tasks.jsonl");
    let out = mas2(&["--mock", "--seed", "3", "run", s(&tasks), "--out", s(dir.path())]);
    let (stdout, stderr) = text(&out);
    assert!(out.status.success(), "{stderr}");
    assert!(stdout.contains("trajectories  3"), "{stdout}");
    assert!(stderr.contains("calibrated theta_c"));

    let records = read_trajectories(&dir.path().join("run.traj.jsonl")).unwrap();
    assert_eq!(records.len(), 3);
    let report = RunReport::from_records(&records);
    assert_eq!(fs::read_to_string(dir.path().join("report.txt")).unwrap(), report.to_text());
    assert_eq!(fs::read_to_string(dir.path().join("report.csv")).unwrap().lines().count(), 4);

    // `report` over the log reproduces the run's report.
    let csv = dir.path().join("again.csv");
    let again = mas2(&["report", s(&dir.path().join("run.traj.jsonl")), "--csv", s(&csv)]);
    assert!(again.status.success());
    assert_eq!(text(&again).0, report.to_text());
    assert_eq!(fs::read(&csv).unwrap(), fs::read(dir.path().join("report.csv")).unwrap());
}

#[test]
fn curate_then_eval_loss() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = repo_file("configs/demo-tasks.jsonl");
    let out = mas2(&["--mock", "curate", s(&tasks), "-k", "4", "-n", "2", "--out", s(dir.path())]);
    let (stdout, stderr) = text(&out);
    assert!(out.status.success(), "{stderr}");
    assert_eq!(stdout.lines().count(), 3, "{stdout}");
    for id in ["life", "life-num", "contains"] {
        assert!(dir.path().join(format!("{id}.cto.json")).exists());
    }
    let prefs = import_preferences(&dir.path().join("prefs.jsonl")).unwrap();
    assert!(!prefs.is_empty());

    let lp: Vec<LogProbRecord> = prefs
        .iter()
        .map(|t| LogProbRecord { tuple_id: t.tuple_id.clone(), lp_theta_win: -1.0, lp_theta_lose: -1.0, lp_ref_win: -1.0, lp_ref_lose: -1.0 })
        .collect();
    let lp_path = dir.path().join("lp.jsonl");
    write_logprobs(&lp, &lp_path).unwrap();
    let json = dir.path().join("loss.json");
    let out = mas2(&["eval-loss", s(&dir.path().join("prefs.jsonl")), s(&lp_path), "--reduction", "sum", "--json", s(&json)]);
    assert!(out.status.success(), "{}", text(&out).1);
    // Every margin is zero, so the summed loss is ln 2 times the summed gaps.
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let want = prefs.iter().map(|t| t.delta_v).sum::<f64>() * std::f64::consts::LN_2;
    let got = report["loss"].as_f64().unwrap();
    assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");

    // A log-probability file missing a tuple is rejected.
    write_logprobs(&lp[1..], &lp_path).unwrap();
    let out = mas2(&["eval-loss", s(&dir.path().join("prefs.jsonl")), s(&lp_path)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn generate_then_instantiate() {
    let dir = tempfile::tempdir().unwrap();
    let out = mas2(&["--mock", "generate", "--query", "What is six times seven?", "-k", "2", "--out", s(&dir.path().join("t"))]);
    assert!(out.status.success(), "{}", text(&out).1);
    let g0 = dir.path().join("t/g0.mas2t");
    assert!(g0.exists() && dir.path().join("t/g1.mas2t").exists());
    let out = mas2(&["--mock", "instantiate", s(&g0), "-n", "2", "--out", s(&dir.path().join("w"))]);
    assert!(out.status.success(), "{}", text(&out).1);
    let w = fs::read_to_string(dir.path().join("w/i0.mas2t")).unwrap();
    assert!(!w.contains("llm_symbol"));
    assert!(w.contains("gpt-4o-mini"));
}

#[test]
fn unusable_generator_output_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("mock.json");
    fs::write(&script, r#"{"rules": [], "default": "I would rather not."}"#).unwrap();
    let out = mas2(&[&format!("--mock={}", s(&script)), "generate", "--query", "q", "-k", "1", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).1.starts_with("error:"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[meta]\ntheta_c = \"lots\"\n").unwrap();
    let out = mas2(&["--config", s(&bad), "report"]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(&bad, "[meta]\nk = 0\n").unwrap();
    assert_eq!(mas2(&["--config", s(&bad), "report"]).status.code(), Some(2));
    assert_eq!(mas2(&["--config", s(&dir.path().join("missing.toml")), "report"]).status.code(), Some(2));
}

#[test]
fn example_config_loads() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.traj.jsonl");
    fs::write(&log, "").unwrap();
    let out = mas2(&["--config", s(&repo_file("configs/config.toml")), "report", s(&log)]);
    assert!(out.status.success(), "{}", text(&out).1);
    assert!(text(&out).0.contains("trajectories  0"));
}

#[test]
fn report_rejects_future_schema() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("x.traj.jsonl");
    fs::write(&log, "{\"schema_version\": 9, \"task_id\": \"a\", \"trajectory_id\": \"a/0\", \"outcome\": null}\n").unwrap();
    let out = mas2(&["report", s(&log)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).1.contains("schema version 9"));
}

#[test]
fn example_catalog_matches_the_built_in_one() {
    let toml = fs::read_to_string(repo_file("configs/catalog.toml")).unwrap();
    let file = mas2::gateway::Catalog::from_toml(&toml).unwrap();
    assert_eq!(file.cards(), mas2::gateway::Catalog::seed().cards());

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("[gateway]\ncatalog = {:?}\n", s(&repo_file("configs/catalog.toml")))).unwrap();
    let out = mas2(&["--mock", "--config", s(&cfg), "generate", "--query", "q", "-k", "1", "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", text(&out).1);
}
