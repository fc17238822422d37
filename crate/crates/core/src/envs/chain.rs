use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{chain_mdp, EnvSpec, Environment, Step, TabularMdp};
use crate::Result;

/// The tabular chain exposed as a control task: one-hot observations and a
/// one-dimensional action that has no effect. Rewards are stochastic, so
/// the return distribution is non-degenerate.
#[derive(Debug, Clone)]
pub struct ChainEnv {
    spec: EnvSpec,
    mdp: TabularMdp,
    state: usize,
    rng: ChaCha8Rng,
}

impl ChainEnv {
    pub fn new(n_states: usize, p_reward: f64) -> Result<Self> {
        let mdp = chain_mdp(n_states, p_reward, 1.0)?;
        Ok(Self {
            spec: EnvSpec::new(n_states, vec![-1.0], vec![1.0], n_states - 1)?,
            mdp,
            state: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = vec![0.0; self.mdp.n_states()];
        obs[self.state] = 1.0;
        obs
    }
}

impl Environment for ChainEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(rng.random());
        self.state = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Step {
        let (_, action_clipped) = self.spec.clip_action(action);
        let (reward, next) = self.mdp.sample(self.state, 0, &mut self.rng);
        self.state = next;
        Step {
            observation: self.observation(),
            reward,
            terminated: self.mdp.is_terminal(next),
            truncated: false,
            action_clipped,
        }
    }
}
