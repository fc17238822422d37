use std::path::Path;
use std::process::{Command, Output};

use distcritic_harness::aggregate::read_aggregate;
use distcritic_harness::metrics::read_metrics;

fn distcritic(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distcritic"))
        .args(args)
        .current_dir(dir)
        .env("DISTCRITIC_THREADS", "1")
        .output()
        .unwrap()
}

const TINY: &str = r#"{
  "algorithm": "td3", "strategy": "fixed", "n_atoms": 3, "env": "pointmass",
  "steps": 200, "eval_interval": 100, "eval_episodes": 2, "seed": 5,
  "overrides": {"critic_hidden": [8], "actor_hidden": [8], "batch_size": 8,
                "learning_starts": 50, "buffer_capacity": 500}
}"#;

#[test]
fn train_aggregate_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), TINY).unwrap();
    for seed in ["1", "2"] {
        let out = distcritic(&["train", "--config", "cfg.json", "--seed", seed, "--out", &format!("run{seed}")], d);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(read_metrics(d.join(format!("run{seed}/metrics.csv"))).unwrap().len(), 3);
    }
    let out = distcritic(&["aggregate", "--runs", "run1", "run2", "--out", "agg.csv"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let agg = read_aggregate(d.join("agg.csv")).unwrap();
    assert_eq!(agg.iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 100, 200]);
    assert!(agg.iter().all(|r| r.runs == 2));
    let out = distcritic(&["plot", "--agg", "td3 fixed=agg.csv", "--out", "fig.svg"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(d.join("fig.svg")).unwrap().contains(">td3 fixed<"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), TINY.replace("\"steps\": 200", "\"steps\": 250")).unwrap();
    let out = distcritic(&["train", "--config", "bad.json", "--out", "run"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("multiple of eval_interval"));
    assert_eq!(distcritic(&["train", "--config", "missing.json", "--out", "run"], d).status.code(), Some(2));
    assert_eq!(distcritic(&["train", "--out", "run"], d).status.code(), Some(2));
    assert_eq!(distcritic(&["frobnicate"], d).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("a.csv"), "step,mean_return,ep_returns,critic_loss,actor_loss,fpn_loss,wall_s\n0,1,1,,,,0\n").unwrap();
    std::fs::write(d.join("b.csv"), "step,mean_return,ep_returns,critic_loss,actor_loss,fpn_loss,wall_s\n5,1,1,,,,0\n").unwrap();
    let out = distcritic(&["aggregate", "--runs", "a.csv", "b.csv", "--out", "agg.csv"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("b.csv"));
    let diverging = TINY.replace("\"batch_size\": 8", "\"batch_size\": 8, \"learning_rate\": 1e300");
    std::fs::write(d.join("nan.json"), diverging).unwrap();
    let out = distcritic(&["train", "--config", "nan.json", "--out", "nan"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(d.join("nan/metrics.csv").is_file());
}

#[test]
fn sweep_runs_the_grid_and_summarizes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("grid.json"),
        r#"{"algorithms": ["sac"], "strategies": ["fixed", "sampled"], "n_atoms": [2],
            "seeds": [0, 1], "env": "pointmass", "steps": 100, "eval_interval": 50,
            "eval_episodes": 1, "scalar_baseline": true,
            "overrides": {"critic_hidden": [8], "actor_hidden": [8], "batch_size": 8,
                          "learning_starts": 20, "buffer_capacity": 200}}"#,
    )
    .unwrap();
    let out = distcritic(&["sweep", "--config", "grid.json", "--jobs", "4", "--out", "sw"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("6 runs on 1 workers"));
    for label in ["sac-fixed-2", "sac-sampled-2", "sac-scalar"] {
        let agg = read_aggregate(d.join("sw").join(label).join("aggregate.csv")).unwrap();
        assert_eq!(agg.len(), 3);
        assert!(agg.iter().all(|r| r.runs == 2));
    }
    assert!(d.join("sw/curves.svg").is_file());
}

#[test]
fn verify_fast_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = distcritic(&["verify", "--fast"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 7);
}
