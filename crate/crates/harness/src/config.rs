//! Run configuration as read from JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use distcritic_core::agents::{AgentConfig, Algorithm};
use distcritic_core::critics::Strategy;
use distcritic_core::envs::EnvName;
use distcritic_core::nn::Activation;

use crate::{HarnessError, HarnessResult};

pub const DEFAULT_STEPS: u64 = 100_000;
pub const DEFAULT_EVAL_INTERVAL: u64 = 1000;
pub const DEFAULT_EVAL_EPISODES: usize = 5;

fn default_steps() -> u64 {
    DEFAULT_STEPS
}

fn default_eval_interval() -> u64 {
    DEFAULT_EVAL_INTERVAL
}

fn default_eval_episodes() -> usize {
    DEFAULT_EVAL_EPISODES
}

/// Optional replacements for any [`AgentConfig`] field. Unset fields keep the
/// per-variant defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic_hidden: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic_activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cos: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_hidden: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polyak: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fpn_learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_delay: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration_noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_noise_clip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_capacity: Option<usize>,
}

impl AgentOverrides {
    pub fn apply(&self, cfg: &mut AgentConfig) {
        macro_rules! set {
            ($src:ident => $($dst:ident).+) => {
                if let Some(v) = &self.$src {
                    cfg.$($dst).+ = v.clone();
                }
            };
        }
        set!(critic_hidden => critic.hidden);
        set!(critic_activation => critic.activation);
        set!(kappa => critic.kappa);
        set!(n_cos => critic.n_cos);
        set!(actor_hidden => actor_hidden);
        set!(actor_activation => actor_activation);
        set!(gamma => gamma);
        set!(polyak => polyak);
        set!(batch_size => batch_size);
        set!(learning_rate => learning_rate);
        set!(fpn_learning_rate => fpn_learning_rate);
        set!(policy_delay => policy_delay);
        set!(exploration_noise => exploration_noise);
        set!(target_noise => target_noise);
        set!(target_noise_clip => target_noise_clip);
        set!(alpha => alpha);
        set!(learning_starts => learning_starts);
        set!(buffer_capacity => buffer_capacity);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub strategy: Strategy,
    pub n_atoms: usize,
    pub env: EnvName,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: u64,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub seed: u64,
    /// Expected-value baseline: one fixed atom with the squared TD loss.
    /// `strategy` and `n_atoms` are ignored when set.
    #[serde(default)]
    pub scalar_baseline: bool,
    #[serde(default)]
    pub overrides: AgentOverrides,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, strategy: Strategy, n_atoms: usize, env: EnvName) -> Self {
        Self {
            algorithm,
            strategy,
            n_atoms,
            env,
            steps: DEFAULT_STEPS,
            eval_interval: DEFAULT_EVAL_INTERVAL,
            eval_episodes: DEFAULT_EVAL_EPISODES,
            seed: 0,
            scalar_baseline: false,
            overrides: AgentOverrides::default(),
        }
    }

    pub fn from_json(text: &str) -> HarnessResult<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> HarnessResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Short label such as `sac-fixed-7` or `sac-scalar`.
    pub fn label(&self) -> String {
        if self.scalar_baseline {
            format!("{}-scalar", self.algorithm)
        } else {
            format!("{}-{}-{}", self.algorithm, self.strategy, self.n_atoms)
        }
    }

    /// Resolved agent configuration, validated.
    pub fn agent_config(&self) -> HarnessResult<AgentConfig> {
        let mut cfg = if self.scalar_baseline {
            AgentConfig::scalar_baseline(self.algorithm)
        } else {
            AgentConfig::defaults(self.algorithm, self.strategy, self.n_atoms)
        };
        self.overrides.apply(&mut cfg);
        cfg.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> HarnessResult<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be positive".into());
        }
        if self.steps % self.eval_interval != 0 {
            return bad(format!(
                "steps ({}) must be a multiple of eval_interval ({})",
                self.steps, self.eval_interval
            ));
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive".into());
        }
        self.agent_config().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = RunConfig::from_json(r#"{"algorithm":"sac","strategy":"fixed","n_atoms":7,"env":"pendulum"}"#).unwrap();
        assert_eq!(cfg.steps, 100_000);
        assert_eq!(cfg.eval_interval, 1000);
        assert_eq!(cfg.eval_episodes, 5);
        assert_eq!(cfg.seed, 0);
        cfg.validate().unwrap();
        assert_eq!(cfg.agent_config().unwrap().learning_rate, 8e-4);
        assert_eq!(cfg.label(), "sac-fixed-7");
    }

    #[test]
    fn overrides_reach_the_agent() {
        let cfg = RunConfig::from_json(
            r#"{"algorithm":"td3","strategy":"learned","n_atoms":3,"env":"pointmass",
                "overrides":{"critic_hidden":[16],"batch_size":8,"fpn_learning_rate":0.0,"kappa":2.0}}"#,
        )
        .unwrap();
        let a = cfg.agent_config().unwrap();
        assert_eq!(a.critic.hidden, vec![16]);
        assert_eq!(a.batch_size, 8);
        assert_eq!(a.fpn_learning_rate, 0.0);
        assert_eq!(a.critic.kappa, 2.0);
        assert_eq!(a.actor_hidden, vec![256, 256]);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let base = RunConfig::new(Algorithm::Sac, Strategy::Fixed, 7, EnvName::Pendulum);
        let cases = [
            RunConfig { steps: 1500, ..base.clone() },
            RunConfig { eval_interval: 0, ..base.clone() },
            RunConfig { eval_episodes: 0, ..base.clone() },
            RunConfig { n_atoms: 0, ..base.clone() },
        ];
        for c in cases {
            assert_eq!(c.validate().unwrap_err().exit_code(), 2, "{c:?}");
        }
        for text in [
            r#"{"algorithm":"sac","strategy":"fixed","n_atoms":7,"env":"pendulum","seed":-1}"#,
            r#"{"algorithm":"ppo","strategy":"fixed","n_atoms":7,"env":"pendulum"}"#,
            r#"{"algorithm":"sac","strategy":"fixed","n_atoms":7,"env":"pendulum","stpes":10}"#,
        ] {
            assert!(matches!(RunConfig::from_json(text), Err(HarnessError::Config(_))), "{text}");
        }
    }

    #[test]
    fn scalar_baseline_label_and_loss() {
        let mut cfg = RunConfig::new(Algorithm::Sac, Strategy::Learned, 32, EnvName::Pendulum);
        cfg.scalar_baseline = true;
        let a = cfg.agent_config().unwrap();
        assert_eq!(a.critic.n_atoms, 1);
        assert_eq!(a.critic.strategy, Strategy::Fixed);
        assert_eq!(cfg.label(), "sac-scalar");
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = RunConfig::new(Algorithm::Td3, Strategy::Sampled, 51, EnvName::Pointmass);
        cfg.overrides.alpha = Some(0.1);
        let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
