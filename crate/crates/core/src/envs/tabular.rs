use rand::Rng;

use crate::error::invalid;
use crate::Result;

const ROW_TOL: f64 = 1e-9;

/// Finite MDP with finitely supported stochastic rewards.
///
/// Rewards are paid on leaving `(s, a)`; terminal states are absorbing with
/// zero return.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `[s][a][s']`, flattened.
    transitions: Vec<f64>,
    /// `[s][a]` → `(reward, probability)` support.
    rewards: Vec<Vec<(f64, f64)>>,
    gamma: f64,
    terminal: Vec<bool>,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<Vec<(f64, f64)>>,
        gamma: f64,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(invalid!("MDP needs at least one state and one action"));
        }
        if transitions.len() != n_states * n_actions * n_states
            || rewards.len() != n_states * n_actions
            || terminal.len() != n_states
        {
            return Err(invalid!("MDP table sizes do not match state/action counts"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid!("discount must lie in [0, 1], got {gamma}"));
        }
        for row in transitions.chunks(n_states) {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
                return Err(invalid!("transition row {row:?} is not a distribution"));
            }
        }
        for support in &rewards {
            if support.is_empty()
                || support.iter().any(|&(r, p)| !r.is_finite() || !(p > 0.0))
                || (support.iter().map(|a| a.1).sum::<f64>() - 1.0).abs() > ROW_TOL
            {
                return Err(invalid!("reward support {support:?} is not a finite distribution"));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            gamma,
            terminal,
        })
    }

    /// Random dense MDP with two-point reward distributions, for property tests.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, gamma: f64, rng: &mut R) -> Result<Self> {
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let raw: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            transitions.extend(raw.iter().map(|x| x / total));
        }
        let rewards = (0..n_states * n_actions)
            .map(|_| {
                let p = rng.random_range(0.1..0.9);
                let lo = rng.random_range(-1.0..1.0);
                let hi = lo + rng.random_range(0.1..1.0);
                vec![(lo, p), (hi, 1.0 - p)]
            })
            .collect();
        Self::new(n_states, n_actions, transitions, rewards, gamma, vec![false; n_states])
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// `P(· | s, a)`.
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn reward_distribution(&self, s: usize, a: usize) -> &[(f64, f64)] {
        &self.rewards[s * self.n_actions + a]
    }

    /// Largest absolute reward over all supports.
    pub fn max_abs_reward(&self) -> f64 {
        self.rewards
            .iter()
            .flatten()
            .map(|&(r, _)| r.abs())
            .fold(0.0, f64::max)
    }

    /// Samples `(reward, next_state)` for `(s, a)`.
    pub fn sample<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (f64, usize) {
        (
            sample_support(self.reward_distribution(s, a).iter().copied(), rng),
            sample_index(self.transition(s, a), rng),
        )
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn sample_support<R: Rng + ?Sized>(support: impl Iterator<Item = (f64, f64)>, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0.0;
    for (v, p) in support {
        acc += p;
        last = v;
        if u < acc {
            return v;
        }
    }
    last
}

/// Stochastic policy `π(a | s)`, one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    rows: Vec<Vec<f64>>,
}

impl TabularPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for row in &rows {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
                return Err(invalid!("policy row {row:?} is not a distribution"));
            }
        }
        Ok(Self { rows })
    }

    pub fn uniform(mdp: &TabularMdp) -> Self {
        let p = 1.0 / mdp.n_actions() as f64;
        Self {
            rows: vec![vec![p; mdp.n_actions()]; mdp.n_states()],
        }
    }

    pub fn random<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R) -> Self {
        let rows = (0..mdp.n_states())
            .map(|_| {
                let raw: Vec<f64> = (0..mdp.n_actions()).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|x| x / total).collect()
            })
            .collect();
        Self { rows }
    }

    pub fn probs(&self, s: usize) -> &[f64] {
        &self.rows[s]
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_index(&self.rows[s], rng)
    }

    pub(crate) fn check(&self, mdp: &TabularMdp) -> Result<()> {
        if self.rows.len() != mdp.n_states() || self.rows.iter().any(|r| r.len() != mdp.n_actions()) {
            return Err(invalid!("policy shape does not match the MDP"));
        }
        Ok(())
    }
}

/// Left-to-right chain with a single action. Each step pays a Bernoulli(p)
/// reward; the last state is terminal.
pub fn chain_mdp(n_states: usize, p_reward: f64, gamma: f64) -> Result<TabularMdp> {
    if n_states < 2 {
        return Err(invalid!("a chain needs at least two states"));
    }
    if !(0.0..=1.0).contains(&p_reward) {
        return Err(invalid!("reward probability must lie in [0, 1], got {p_reward}"));
    }
    let mut transitions = vec![0.0; n_states * n_states];
    let mut rewards = Vec::with_capacity(n_states);
    for s in 0..n_states {
        let next = (s + 1).min(n_states - 1);
        transitions[s * n_states + next] = 1.0;
        let support = if s == n_states - 1 || p_reward == 0.0 {
            vec![(0.0, 1.0)]
        } else if p_reward == 1.0 {
            vec![(1.0, 1.0)]
        } else {
            vec![(0.0, 1.0 - p_reward), (1.0, p_reward)]
        };
        rewards.push(support);
    }
    let mut terminal = vec![false; n_states];
    terminal[n_states - 1] = true;
    TabularMdp::new(n_states, 1, transitions, rewards, gamma, terminal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chain_structure() {
        let mdp = chain_mdp(3, 0.5, 0.9).unwrap();
        assert_eq!(mdp.transition(0, 0), &[0.0, 1.0, 0.0]);
        assert_eq!(mdp.transition(1, 0), &[0.0, 0.0, 1.0]);
        assert!(mdp.is_terminal(2));
        assert_eq!(mdp.reward_distribution(0, 0), &[(0.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn chain_validation() {
        assert!(chain_mdp(1, 0.5, 0.9).is_err());
        assert!(chain_mdp(3, 1.5, 0.9).is_err());
        assert!(chain_mdp(3, -0.1, 0.9).is_err());
        assert!(chain_mdp(3, 0.5, 1.5).is_err());
    }

    #[test]
    fn random_mdp_is_valid_and_samples_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mdp = TabularMdp::random(4, 2, 0.9, &mut rng).unwrap();
        let pi = TabularPolicy::random(&mdp, &mut rng);
        pi.check(&mdp).unwrap();
        for _ in 0..100 {
            let a = pi.sample(1, &mut rng);
            let (r, s) = mdp.sample(1, a, &mut rng);
            assert!(s < 4 && r.abs() <= mdp.max_abs_reward());
        }
    }

    #[test]
    fn bad_tables_rejected() {
        assert!(TabularMdp::new(2, 1, vec![0.5, 0.4, 0.0, 1.0], vec![vec![(0.0, 1.0)]; 2], 0.9, vec![false; 2]).is_err());
        assert!(TabularMdp::new(2, 1, vec![0.5, 0.5, 0.0, 1.0], vec![vec![]; 2], 0.9, vec![false; 2]).is_err());
        assert!(TabularPolicy::new(vec![vec![0.5, 0.6]]).is_err());
    }
}
