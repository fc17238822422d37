//! Deterministic toy control tasks and small tabular MDPs.
//!
//! Agents act in the normalized box `[-1, 1]^d`; [`EnvSpec::scale_action`]
//! maps such actions into the environment's own bounds.

mod chain;
mod pendulum;
mod pointmass;
mod tabular;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::Result;

pub use chain::ChainEnv;
pub use pendulum::{pendulum_step, Pendulum, PendulumState};
pub use pointmass::{pointmass_step, PointMass, PointMassState};
pub use tabular::{chain_mdp, TabularMdp, TabularPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub observation_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    pub fn new(observation_dim: usize, action_low: Vec<f64>, action_high: Vec<f64>, max_episode_steps: usize) -> Result<Self> {
        if action_low.len() != action_high.len() || action_low.is_empty() {
            return Err(invalid!("action bounds must be non-empty and of equal length"));
        }
        if action_low.iter().chain(&action_high).any(|b| !b.is_finite())
            || action_low.iter().zip(&action_high).any(|(l, h)| l >= h)
        {
            return Err(invalid!("action bounds must be finite with low < high"));
        }
        if max_episode_steps == 0 {
            return Err(invalid!("episodes need at least one step"));
        }
        Ok(Self {
            observation_dim,
            action_dim: action_low.len(),
            action_low,
            action_high,
            max_episode_steps,
        })
    }

    /// Maps a normalized action in `[-1, 1]` to the environment bounds.
    pub fn scale_action(&self, normalized: &[f64]) -> Vec<f64> {
        normalized
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| lo + 0.5 * (a.clamp(-1.0, 1.0) + 1.0) * (hi - lo))
            .collect()
    }

    /// Clips `action` into bounds; the flag reports whether clipping happened.
    pub fn clip_action(&self, action: &[f64]) -> (Vec<f64>, bool) {
        let mut clipped = false;
        let out = action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| {
                let c = a.clamp(lo, hi);
                clipped |= c != a;
                c
            })
            .collect();
        (out, clipped)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Reached a terminal state (bootstrapping stops).
    pub terminated: bool,
    /// Hit the episode step limit.
    pub truncated: bool,
    /// The submitted action was outside the bounds and got clipped.
    pub action_clipped: bool,
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode and returns its first observation.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Advances one step with an action in environment units.
    fn step(&mut self, action: &[f64]) -> Step;
}

/// Environment registry used by run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvName {
    Pendulum,
    Pointmass,
    Chain,
}

impl EnvName {
    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvName::Pendulum => Box::new(Pendulum::new()),
            EnvName::Pointmass => Box::new(PointMass::new()),
            EnvName::Chain => Box::new(ChainEnv::new(5, 0.5).expect("valid default chain")),
        }
    }
}

impl std::str::FromStr for EnvName {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(EnvName::Pendulum),
            "pointmass" => Ok(EnvName::Pointmass),
            "chain" => Ok(EnvName::Chain),
            other => Err(invalid!("unknown environment {other:?}")),
        }
    }
}

pub fn make_env(name: &str) -> Result<Box<dyn Environment>> {
    Ok(name.parse::<EnvName>()?.make())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names() {
        for (name, obs) in [("pendulum", 3), ("pointmass", 4), ("chain", 5)] {
            assert_eq!(make_env(name).unwrap().spec().observation_dim, obs);
        }
        assert!(make_env("hopper").is_err());
    }

    #[test]
    fn action_scaling() {
        let spec = EnvSpec::new(1, vec![-2.0], vec![2.0], 10).unwrap();
        assert_eq!(spec.scale_action(&[0.5]), vec![1.0]);
        assert_eq!(spec.scale_action(&[-1.0]), vec![-2.0]);
        assert_eq!(spec.clip_action(&[3.0]), (vec![2.0], true));
        assert!(EnvSpec::new(1, vec![1.0], vec![1.0], 10).is_err());
        assert!(EnvSpec::new(1, vec![0.0], vec![1.0], 0).is_err());
    }
}
