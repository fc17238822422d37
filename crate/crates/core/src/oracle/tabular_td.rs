use rand::Rng;

use crate::distcore::{fixed_fractions, rho_derivative, QuantileDistribution};
use crate::envs::{TabularMdp, TabularPolicy};
use crate::error::invalid;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    /// `initial / (1 + t / half_life)`.
    InverseDecay { initial: f64, half_life: f64 },
}

impl LearningRate {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            LearningRate::Constant(lr) => lr,
            LearningRate::InverseDecay { initial, half_life } => initial / (1.0 + t as f64 / half_life),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularTdConfig {
    pub n_atoms: usize,
    /// Huber threshold; `0` selects the plain quantile (pinball) loss, the
    /// `κ → 0` limit.
    pub kappa: f64,
    pub learning_rate: LearningRate,
    /// Number of single-transition updates.
    pub updates: usize,
    pub start_state: usize,
    /// Episodes restart after this many steps even without a terminal state.
    pub max_episode_steps: usize,
}

impl Default for TabularTdConfig {
    fn default() -> Self {
        Self {
            n_atoms: 4,
            kappa: 0.0,
            learning_rate: LearningRate::Constant(0.01),
            updates: 200_000,
            start_state: 0,
            max_episode_steps: 1000,
        }
    }
}

/// `−∂ρ/∂θ` for one residual `u = y − θ`.
fn quantile_step(u: f64, tau: f64, kappa: f64) -> f64 {
    if kappa == 0.0 {
        if u < 0.0 {
            tau - 1.0
        } else if u > 0.0 {
            tau
        } else {
            0.0
        }
    } else {
        rho_derivative(u, tau, kappa)
    }
}

/// Quantile TD on sampled transitions: per-state quantile values move along
/// the quantile-loss subgradient against bootstrapped targets
/// `r + γ·θⱼ(s')`.
pub fn tabular_quantile_td<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    cfg: &TabularTdConfig,
    rng: &mut R,
) -> Result<Vec<QuantileDistribution>> {
    policy.check(mdp)?;
    if !(cfg.kappa >= 0.0) {
        return Err(invalid!("kappa must be non-negative"));
    }
    if cfg.start_state >= mdp.n_states() {
        return Err(invalid!("start state out of range"));
    }
    let fractions = fixed_fractions(cfg.n_atoms)?;
    let taus = fractions.midpoints().to_vec();
    let n = cfg.n_atoms;
    let gamma = mdp.gamma();
    let mut theta = vec![vec![0.0; n]; mdp.n_states()];
    let mut targets = vec![0.0; n];
    let mut s = cfg.start_state;
    let mut episode_steps = 0;
    for t in 0..cfg.updates {
        if mdp.is_terminal(s) || episode_steps >= cfg.max_episode_steps {
            s = cfg.start_state;
            episode_steps = 0;
            if mdp.is_terminal(s) {
                return Err(invalid!("start state is terminal"));
            }
        }
        let a = policy.sample(s, rng);
        let (r, s2) = mdp.sample(s, a, rng);
        for (y, &z) in targets.iter_mut().zip(&theta[s2]) {
            *y = if mdp.is_terminal(s2) { r } else { r + gamma * z };
        }
        let lr = cfg.learning_rate.at(t);
        let row = &mut theta[s];
        for (v, &tau) in row.iter_mut().zip(&taus) {
            let step: f64 = targets.iter().map(|&y| quantile_step(y - *v, tau, cfg.kappa)).sum();
            *v += lr * step / n as f64;
        }
        s = s2;
        episode_steps += 1;
    }
    theta
        .into_iter()
        .map(|values| QuantileDistribution::new(fractions.clone(), values))
        .collect()
}
