//! Cross-product sweeps over algorithms, strategies, atom counts and seeds,
//! run on a bounded pool of worker threads that share nothing but a job
//! counter.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use distcritic_core::agents::Algorithm;
use distcritic_core::critics::Strategy;
use distcritic_core::envs::EnvName;

use crate::aggregate::{aggregate, write_aggregate};
use crate::config::{AgentOverrides, RunConfig, DEFAULT_EVAL_EPISODES, DEFAULT_EVAL_INTERVAL, DEFAULT_STEPS};
use crate::plot::{emit_plot, Curve};
use crate::run::run_experiment;
use crate::{HarnessError, HarnessResult};

/// Caps the worker count of every sweep when set.
pub const THREADS_ENV: &str = "DISTCRITIC_THREADS";

fn default_steps() -> u64 {
    DEFAULT_STEPS
}

fn default_eval_interval() -> u64 {
    DEFAULT_EVAL_INTERVAL
}

fn default_eval_episodes() -> usize {
    DEFAULT_EVAL_EPISODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub algorithms: Vec<Algorithm>,
    pub strategies: Vec<Strategy>,
    pub n_atoms: Vec<usize>,
    pub seeds: Vec<u64>,
    pub env: EnvName,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: u64,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Also run the expected-value baseline for every algorithm and seed.
    #[serde(default)]
    pub scalar_baseline: bool,
    #[serde(default)]
    pub overrides: AgentOverrides,
}

/// One run of a sweep and where it writes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepJob {
    pub label: String,
    pub dir: PathBuf,
    pub config: RunConfig,
}

#[derive(Debug)]
pub struct JobOutcome {
    pub job: SweepJob,
    pub result: HarnessResult<PathBuf>,
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> HarnessResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// All runs, grouped by configuration label in a fixed order, seeds
    /// innermost. Every run config is validated.
    pub fn expand(&self, out: &Path) -> HarnessResult<Vec<SweepJob>> {
        if self.algorithms.is_empty() || self.seeds.is_empty() {
            return Err(HarnessError::Config("a sweep needs at least one algorithm and one seed".into()));
        }
        if !self.scalar_baseline && (self.strategies.is_empty() || self.n_atoms.is_empty()) {
            return Err(HarnessError::Config("a sweep needs strategies and atom counts".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.seeds.iter().all(|s| seen.insert(*s)) {
            return Err(HarnessError::Config("duplicate seeds".into()));
        }
        let template = |algorithm, strategy, n_atoms, seed, scalar_baseline| RunConfig {
            algorithm,
            strategy,
            n_atoms,
            env: self.env,
            steps: self.steps,
            eval_interval: self.eval_interval,
            eval_episodes: self.eval_episodes,
            seed,
            scalar_baseline,
            overrides: self.overrides.clone(),
        };
        let mut configs = Vec::new();
        for &alg in &self.algorithms {
            for &strategy in &self.strategies {
                for &n in &self.n_atoms {
                    configs.extend(self.seeds.iter().map(|&seed| template(alg, strategy, n, seed, false)));
                }
            }
            if self.scalar_baseline {
                configs.extend(self.seeds.iter().map(|&seed| template(alg, Strategy::Fixed, 1, seed, true)));
            }
        }
        configs
            .into_iter()
            .map(|config| {
                config.validate()?;
                let label = config.label();
                Ok(SweepJob {
                    dir: out.join(&label).join(format!("seed-{}", config.seed)),
                    label,
                    config,
                })
            })
            .collect()
    }
}

/// Worker count: `requested`, capped by [`THREADS_ENV`] and by the number
/// of jobs, at least one.
pub fn worker_count(requested: usize, jobs: usize) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&c| c > 0)
        .unwrap_or(usize::MAX);
    requested.min(cap).min(jobs).max(1)
}

/// Runs every job on at most `workers` threads; failures are reported per
/// job and do not stop the others. Outcomes come back in job order.
pub fn run_jobs(jobs: Vec<SweepJob>, workers: usize, on_done: impl Fn(&JobOutcome) + Sync) -> Vec<JobOutcome> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<JobOutcome>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let result = run_experiment(&job.config, &job.dir);
                let outcome = JobOutcome { job: job.clone(), result };
                on_done(&outcome);
                *slots[i].lock().expect("no worker panics while holding a slot") = Some(outcome);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every job ran"))
        .collect()
}

/// Writes `<label>/aggregate.csv` for every label whose runs all finished,
/// and `curves.svg` comparing them. Returns the labels aggregated.
pub fn summarize(outcomes: &[JobOutcome], out: &Path) -> HarnessResult<Vec<String>> {
    let mut labels: Vec<&str> = Vec::new();
    for o in outcomes {
        if !labels.contains(&o.job.label.as_str()) {
            labels.push(&o.job.label);
        }
    }
    let mut curves = Vec::new();
    for label in labels {
        let group: Vec<&JobOutcome> = outcomes.iter().filter(|o| o.job.label == label).collect();
        if group.iter().any(|o| o.result.is_err()) {
            continue;
        }
        let dirs: Vec<PathBuf> = group.iter().map(|o| o.job.dir.clone()).collect();
        let rows = aggregate(&dirs)?;
        write_aggregate(out.join(label).join("aggregate.csv"), &rows)?;
        curves.push(Curve {
            name: label.to_string(),
            rows,
        });
    }
    if !curves.is_empty() {
        emit_plot(&curves, out.join("curves.svg"))?;
    }
    Ok(curves.into_iter().map(|c| c.name).collect())
}
