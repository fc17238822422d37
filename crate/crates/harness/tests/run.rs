use std::path::Path;

use distcritic_core::agents::Algorithm;
use distcritic_core::critics::Strategy;
use distcritic_core::envs::EnvName;
use distcritic_harness::config::{AgentOverrides, RunConfig};
use distcritic_harness::metrics::{read_metrics, strip_wall_clock};
use distcritic_harness::run::{run_experiment, RunManifest, RunStatus, CHECKPOINT_DIR};
use distcritic_harness::HarnessError;

fn small(algorithm: Algorithm, strategy: Strategy, n: usize, env: EnvName) -> RunConfig {
    let mut cfg = RunConfig::new(algorithm, strategy, n, env);
    cfg.steps = 300;
    cfg.eval_interval = 100;
    cfg.eval_episodes = 2;
    cfg.seed = 3;
    cfg.overrides = AgentOverrides {
        critic_hidden: Some(vec![16, 16]),
        actor_hidden: Some(vec![16, 16]),
        n_cos: Some(8),
        batch_size: Some(16),
        learning_starts: Some(100),
        buffer_capacity: Some(1000),
        ..Default::default()
    };
    cfg
}

#[test]
fn one_interval_gives_baseline_plus_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Algorithm::Td3, Strategy::Fixed, 3, EnvName::Pointmass);
    cfg.steps = 100;
    let path = run_experiment(&cfg, dir.path()).unwrap();
    let rows = read_metrics(&path).unwrap();
    assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 100]);
    assert!(rows[0].critic_loss.is_none());
    assert_eq!(rows[0].ep_returns.len(), 2);
}

#[test]
fn run_writes_manifest_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Algorithm::Sac, Strategy::Learned, 4, EnvName::Pendulum);
    let path = run_experiment(&cfg, dir.path()).unwrap();
    let rows = read_metrics(&path).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows[1..].iter().all(|r| r.critic_loss.is_some() && r.fpn_loss.is_some() && r.actor_loss.is_some()));
    let m = RunManifest::load(dir.path()).unwrap();
    assert_eq!(m.status, RunStatus::Completed);
    assert_eq!(m.steps_completed, 300);
    assert_eq!(m.config, cfg);
    assert_eq!(m.agent.critic.hidden, vec![16, 16]);
    assert!(dir.path().join(CHECKPOINT_DIR).join("agent.json").is_file());
}

#[test]
fn fpn_column_is_empty_without_learned_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Algorithm::Td3, Strategy::Sampled, 4, EnvName::Pendulum);
    let path = run_experiment(&cfg, dir.path()).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[5], "", "{line}");
    }
}

fn stripped(dir: &Path, cfg: &RunConfig) -> String {
    strip_wall_clock(&std::fs::read_to_string(run_experiment(cfg, dir).unwrap()).unwrap())
}

#[test]
fn same_seed_same_metrics() {
    let dir = tempfile::tempdir().unwrap();
    for (alg, s) in [(Algorithm::Td3, Strategy::Learned), (Algorithm::Sac, Strategy::Sampled)] {
        let cfg = small(alg, s, 5, EnvName::Pendulum);
        let a = stripped(&dir.path().join(format!("{alg}-{s}-a")), &cfg);
        let b = stripped(&dir.path().join(format!("{alg}-{s}-b")), &cfg);
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(a, stripped(&dir.path().join(format!("{alg}-{s}-c")), &other));
    }
}

#[test]
fn divergence_keeps_partial_metrics() {
    let dir = tempfile::tempdir().unwrap();
    // ReLU critics with absurd steps overflow to inf within a few updates
    let mut cfg = small(Algorithm::Td3, Strategy::Fixed, 3, EnvName::Pointmass);
    cfg.overrides.learning_rate = Some(1e300);
    let err = run_experiment(&cfg, dir.path()).unwrap_err();
    let HarnessError::Diverged { step, metrics, .. } = &err else {
        panic!("expected divergence, got {err}");
    };
    assert!(*step > 100);
    assert_eq!(err.exit_code(), 1);
    let rows = read_metrics(metrics).unwrap();
    assert!(!rows.is_empty() && rows[0].step == 0);
    let m = RunManifest::load(dir.path()).unwrap();
    assert_eq!(m.status, RunStatus::Diverged);
    assert!(m.error.is_some());
}

#[test]
fn invalid_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut cfg = small(Algorithm::Sac, Strategy::Fixed, 3, EnvName::Pendulum);
    cfg.steps = 250;
    let err = run_experiment(&cfg, &out).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}
