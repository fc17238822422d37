//! One seeded training run: train, evaluate on a fixed step grid, persist.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use distcritic_core::agents::{evaluate, Agent, AgentConfig, UpdateStats};
use distcritic_core::rng::{self, Stream};
use distcritic_core::Error;

use crate::config::RunConfig;
use crate::metrics::{MetricsRow, MetricsWriter};
use crate::{HarnessError, HarnessResult};

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Completed,
    Diverged,
}

/// Written at start, rewritten when the run finishes or aborts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub agent: AgentConfig,
    pub status: RunStatus,
    pub steps_completed: u64,
    pub metrics: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_s: f64,
}

impl RunManifest {
    pub fn load(dir: impl AsRef<Path>) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(dir.as_ref().join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn write(&self, dir: &Path) -> HarnessResult<()> {
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Running means of the update losses between two evaluations.
#[derive(Default)]
struct LossAccumulator {
    critic: (f64, usize),
    actor: (f64, usize),
    fpn: (f64, usize),
}

impl LossAccumulator {
    fn add(&mut self, u: &UpdateStats) {
        let bump = |acc: &mut (f64, usize), v: f64| {
            acc.0 += v;
            acc.1 += 1;
        };
        bump(&mut self.critic, u.critic_loss);
        if let Some(v) = u.actor_loss {
            bump(&mut self.actor, v);
        }
        if let Some(v) = u.fpn_loss {
            bump(&mut self.fpn, v);
        }
    }

    fn take(&mut self) -> (Option<f64>, Option<f64>, Option<f64>) {
        let mean = |acc: (f64, usize)| (acc.1 > 0).then(|| acc.0 / acc.1 as f64);
        let out = (mean(self.critic), mean(self.actor), mean(self.fpn));
        *self = Self::default();
        out
    }
}

/// Runs `cfg` into `out`, calling `on_row` after each evaluation row is on
/// disk. Returns the metrics file path.
///
/// The first row is the untrained policy at step 0; then one row every
/// `eval_interval` steps. Evaluation uses the deterministic policy on a
/// separate environment instance with its own random stream.
pub fn run_experiment_with(
    cfg: &RunConfig,
    out: &Path,
    mut on_row: impl FnMut(&MetricsRow),
) -> HarnessResult<PathBuf> {
    cfg.validate()?;
    let agent_cfg = cfg.agent_config()?;
    std::fs::create_dir_all(out)?;
    let metrics_path = out.join(METRICS_FILE);
    let mut manifest = RunManifest {
        config: cfg.clone(),
        agent: agent_cfg.clone(),
        status: RunStatus::Running,
        steps_completed: 0,
        metrics: METRICS_FILE.into(),
        checkpoint: None,
        error: None,
        wall_s: 0.0,
    };
    manifest.write(out)?;

    let mut env = cfg.env.make();
    let mut eval_env = cfg.env.make();
    let mut eval_rng = rng::stream(cfg.seed, Stream::Eval);
    let mut agent = Agent::new(agent_cfg, env.spec().clone(), cfg.seed)?;
    let mut writer = MetricsWriter::create(&metrics_path)?;
    let started = Instant::now();

    let mut emit = |step: u64, agent: &Agent, losses: (Option<f64>, Option<f64>, Option<f64>)| -> HarnessResult<()> {
        let (mean_return, ep_returns) = evaluate(agent.actor(), eval_env.as_mut(), cfg.eval_episodes, &mut eval_rng)?;
        let row = MetricsRow {
            step,
            mean_return,
            ep_returns,
            critic_loss: losses.0,
            actor_loss: losses.1,
            fpn_loss: losses.2,
            wall_s: started.elapsed().as_secs_f64(),
        };
        writer.append(&row)?;
        on_row(&row);
        Ok(())
    };

    emit(0, &agent, (None, None, None))?;
    let mut losses = LossAccumulator::default();
    for step in 1..=cfg.steps {
        match agent.train_step(env.as_mut()) {
            Ok(report) => {
                if let Some(u) = &report.update {
                    losses.add(u);
                }
            }
            Err(Error::Diverged(reason)) => {
                manifest.status = RunStatus::Diverged;
                manifest.steps_completed = step - 1;
                manifest.error = Some(reason.clone());
                manifest.wall_s = started.elapsed().as_secs_f64();
                manifest.write(out)?;
                return Err(HarnessError::Diverged {
                    step,
                    reason,
                    metrics: metrics_path,
                });
            }
            Err(e) => return Err(e.into()),
        }
        if step % cfg.eval_interval == 0 {
            emit(step, &agent, losses.take())?;
        }
    }

    let ckpt = out.join(CHECKPOINT_DIR);
    agent.save_checkpoint(&ckpt)?;
    manifest.status = RunStatus::Completed;
    manifest.steps_completed = cfg.steps;
    manifest.checkpoint = Some(CHECKPOINT_DIR.into());
    manifest.wall_s = started.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(metrics_path)
}

pub fn run_experiment(cfg: &RunConfig, out: &Path) -> HarnessResult<PathBuf> {
    run_experiment_with(cfg, out, |_| {})
}
