//! Distributional TD3 and SAC built on the critics in [`crate::critics`].

mod actor;
mod agent;
mod replay;

use serde::{Deserialize, Serialize};

use crate::critics::{CriticConfig, LossKind, Strategy};
use crate::error::invalid;
use crate::nn::Activation;
use crate::Result;

pub use actor::{Actor, ActorKind, LOG_STD_MAX, LOG_STD_MIN};
pub use agent::{
    combine_targets, evaluate, evaluate_policy, random_policy_returns, Agent, AgentCheckpoint, StepReport, UpdateStats,
};
pub use replay::{Batch, ReplayBuffer, Transition};

/// Both algorithms keep twin critics.
pub const NUM_CRITICS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Td3,
    Sac,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Td3 => "td3",
            Algorithm::Sac => "sac",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "td3" => Ok(Algorithm::Td3),
            "sac" => Ok(Algorithm::Sac),
            _ => Err(invalid!("unknown algorithm '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub critic: CriticConfig,
    pub actor_hidden: Vec<usize>,
    pub actor_activation: Activation,
    pub gamma: f64,
    /// Soft target update coefficient.
    pub polyak: f64,
    pub batch_size: usize,
    /// Shared by the actor and the critic value networks.
    pub learning_rate: f64,
    /// Fraction proposer (learned strategy only).
    pub fpn_learning_rate: f64,
    /// Critic updates per actor/target update (TD3).
    pub policy_delay: usize,
    /// TD3 exploration noise std, in normalized action units.
    pub exploration_noise: f64,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    /// SAC entropy coefficient (fixed).
    pub alpha: f64,
    /// Uniform-random steps before learning starts.
    pub learning_starts: usize,
    pub buffer_capacity: usize,
}

impl AgentConfig {
    /// Per-variant defaults: learning rates depend on the algorithm and
    /// fraction strategy; TD3 with fixed fractions uses ReLU, all other
    /// variants tanh.
    pub fn defaults(algorithm: Algorithm, strategy: Strategy, n_atoms: usize) -> Self {
        let learning_rate = match (algorithm, strategy) {
            (Algorithm::Td3, Strategy::Fixed) => 4e-4,
            (Algorithm::Td3, _) => 2e-4,
            (Algorithm::Sac, Strategy::Fixed) => 8e-4,
            (Algorithm::Sac, Strategy::Sampled) => 6e-4,
            (Algorithm::Sac, Strategy::Learned) => 5e-4,
        };
        let fpn_learning_rate = match algorithm {
            Algorithm::Td3 => 2e-6,
            Algorithm::Sac => 5e-6,
        };
        let activation = if algorithm == Algorithm::Td3 && strategy == Strategy::Fixed {
            Activation::Relu
        } else {
            Activation::Tanh
        };
        let critic = CriticConfig {
            activation,
            ..CriticConfig::new(strategy, n_atoms)
        };
        Self {
            algorithm,
            actor_hidden: critic.hidden.clone(),
            critic,
            actor_activation: activation,
            gamma: 0.99,
            polyak: 0.005,
            batch_size: 256,
            learning_rate,
            fpn_learning_rate,
            policy_delay: 2,
            exploration_noise: 0.1,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            alpha: 0.05,
            learning_starts: 10_000,
            buffer_capacity: ReplayBuffer::DEFAULT_CAPACITY,
        }
    }

    /// Expected-value critic: one fixed atom trained with the squared TD
    /// error, everything else as for the fixed-fraction variant.
    pub fn scalar_baseline(algorithm: Algorithm) -> Self {
        let mut cfg = Self::defaults(algorithm, Strategy::Fixed, 1);
        cfg.critic.loss = LossKind::Squared;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.critic.validate()?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.polyak > 0.0 && self.polyak < 1.0) {
            return Err(invalid!("polyak coefficient must lie in (0, 1), got {}", self.polyak));
        }
        // zero is accepted so that frozen-parameter runs can be expressed
        if !(self.learning_rate >= 0.0 && self.fpn_learning_rate >= 0.0) {
            return Err(invalid!("learning rates must be non-negative"));
        }
        if self.batch_size == 0 || self.policy_delay == 0 {
            return Err(invalid!("batch size and policy delay must be positive"));
        }
        if self.actor_hidden.is_empty() || self.actor_hidden.contains(&0) {
            return Err(invalid!("actor hidden widths must be positive"));
        }
        let non_negative = [self.exploration_noise, self.target_noise, self.target_noise_clip, self.alpha];
        if non_negative.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid!("noise scales and alpha must be finite and non-negative"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(invalid!("replay capacity {} is below the batch size", self.buffer_capacity));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_variant_defaults() {
        let td3 = AgentConfig::defaults(Algorithm::Td3, Strategy::Fixed, 7);
        assert_eq!(td3.learning_rate, 4e-4);
        assert_eq!(td3.critic.activation, Activation::Relu);
        assert_eq!(td3.actor_activation, Activation::Relu);
        let td3 = AgentConfig::defaults(Algorithm::Td3, Strategy::Learned, 7);
        assert_eq!((td3.learning_rate, td3.fpn_learning_rate), (2e-4, 2e-6));
        assert_eq!(td3.critic.activation, Activation::Tanh);
        let sac = AgentConfig::defaults(Algorithm::Sac, Strategy::Sampled, 51);
        assert_eq!((sac.learning_rate, sac.alpha, sac.batch_size), (6e-4, 0.05, 256));
        assert_eq!(AgentConfig::defaults(Algorithm::Sac, Strategy::Learned, 7).learning_rate, 5e-4);
        assert_eq!(sac.critic.hidden, vec![256, 256]);
        assert!(sac.validate().is_ok());
        assert!(AgentConfig::scalar_baseline(Algorithm::Sac).validate().is_ok());
    }

    #[test]
    fn validation() {
        let mut c = AgentConfig::defaults(Algorithm::Sac, Strategy::Fixed, 7);
        c.gamma = 1.5;
        assert!(c.validate().is_err());
        let mut c = AgentConfig::defaults(Algorithm::Sac, Strategy::Fixed, 7);
        c.polyak = 0.0;
        assert!(c.validate().is_err());
        let mut c = AgentConfig::defaults(Algorithm::Sac, Strategy::Fixed, 7);
        c.learning_rate = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = AgentConfig::defaults(Algorithm::Td3, Strategy::Sampled, 51);
        let back: AgentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!("SAC".parse::<Algorithm>().unwrap(), Algorithm::Sac);
    }
}
