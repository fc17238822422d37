use crate::distcore::DiscreteDistribution;
use crate::envs::{TabularMdp, TabularPolicy};
use crate::error::invalid;
use crate::{Error, Result};

/// Atoms closer than this are merged.
pub const MERGE_TOL: f64 = 1e-12;
/// Largest atom count an enumeration may produce.
pub const MAX_ATOMS: usize = 10_000_000;

/// Exact truncated return distribution and the bound on the ignored tail.
#[derive(Debug, Clone)]
pub struct ReturnDistribution {
    pub distribution: DiscreteDistribution,
    /// `γ^H · r_max / (1 − γ)`; infinite when `γ = 1`.
    pub tail_bound: f64,
}

/// Sorts atoms and merges values within [`MERGE_TOL`], accumulating mass.
pub(crate) fn merge_atoms(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (v, p) in atoms {
        match out.last_mut() {
            Some(last) if (v - last.0).abs() <= MERGE_TOL => last.1 += p,
            _ => out.push((v, p)),
        }
    }
    out
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_ATOMS {
        return Err(Error::Resource(format!("return distribution would need {n} atoms")));
    }
    Ok(())
}

/// Distribution of `Σ_{t<H} γ^t R_t` from `start` under `policy`, by dynamic
/// programming over (state, steps-to-go).
pub fn enumerate_return_distribution(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    start: usize,
    horizon: usize,
) -> Result<ReturnDistribution> {
    if horizon == 0 {
        return Err(invalid!("horizon must be at least 1"));
    }
    if start >= mdp.n_states() {
        return Err(invalid!("start state {start} out of range"));
    }
    policy.check(mdp)?;
    let gamma = mdp.gamma();
    // dists[s]: return distribution with `k` steps to go
    let mut dists: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 1.0)]; mdp.n_states()];
    for _ in 0..horizon {
        let mut next: Vec<Vec<(f64, f64)>> = Vec::with_capacity(mdp.n_states());
        for s in 0..mdp.n_states() {
            if mdp.is_terminal(s) {
                next.push(vec![(0.0, 1.0)]);
                continue;
            }
            let mut atoms = Vec::new();
            for (a, &pa) in policy.probs(s).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for (s2, &ps) in mdp.transition(s, a).iter().enumerate() {
                    if ps == 0.0 {
                        continue;
                    }
                    for &(r, pr) in mdp.reward_distribution(s, a) {
                        check_size(atoms.len() + dists[s2].len())?;
                        atoms.extend(dists[s2].iter().map(|&(z, pz)| (r + gamma * z, pa * ps * pr * pz)));
                    }
                }
            }
            let merged = merge_atoms(atoms);
            check_size(merged.len())?;
            next.push(merged);
        }
        dists = next;
    }
    let tail_bound = if gamma < 1.0 {
        gamma.powi(horizon as i32) * mdp.max_abs_reward() / (1.0 - gamma)
    } else {
        f64::INFINITY
    };
    Ok(ReturnDistribution {
        distribution: DiscreteDistribution::new(std::mem::take(&mut dists[start]))?,
        tail_bound,
    })
}

/// Same distribution by walking every (action, reward, next state) path
/// individually. Fails if more than `max_paths` paths exist.
pub fn enumerate_paths(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    start: usize,
    horizon: usize,
    max_paths: usize,
) -> Result<DiscreteDistribution> {
    policy.check(mdp)?;
    let mut leaves: Vec<(f64, f64)> = Vec::new();
    let mut stack = vec![(start, 0usize, 0.0f64, 1.0f64, 1.0f64)];
    while let Some((s, t, ret, discount, prob)) = stack.pop() {
        if t == horizon || mdp.is_terminal(s) {
            leaves.push((ret, prob));
            if leaves.len() > max_paths {
                return Err(Error::Resource(format!("more than {max_paths} paths")));
            }
            continue;
        }
        for (a, &pa) in policy.probs(s).iter().enumerate() {
            for (s2, &ps) in mdp.transition(s, a).iter().enumerate() {
                for &(r, pr) in mdp.reward_distribution(s, a) {
                    let p = prob * pa * ps * pr;
                    if p > 0.0 {
                        stack.push((s2, t + 1, ret + discount * r, discount * mdp.gamma(), p));
                    }
                }
            }
        }
    }
    DiscreteDistribution::new(merge_atoms(leaves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::chain_mdp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain_dist(n: usize, p: f64, gamma: f64) -> DiscreteDistribution {
        let mdp = chain_mdp(n, p, gamma).unwrap();
        let pi = TabularPolicy::uniform(&mdp);
        enumerate_return_distribution(&mdp, &pi, 0, 50).unwrap().distribution
    }

    #[test]
    fn deterministic_chain_is_single_atom() {
        let d = chain_dist(4, 1.0, 0.5);
        assert_eq!(d.values(), &[1.75]);
        assert_eq!(d.probs(), &[1.0]);
    }

    #[test]
    fn two_state_chain() {
        let d = chain_dist(2, 0.5, 0.9);
        assert_eq!(d.values(), &[0.0, 1.0]);
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn three_state_chain_discounted() {
        let d = chain_dist(3, 0.5, 0.5);
        assert_eq!(d.values(), &[0.0, 0.5, 1.0, 1.5]);
        assert!(d.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn tail_bound_reported() {
        let mdp = chain_mdp(3, 0.5, 0.5).unwrap();
        let pi = TabularPolicy::uniform(&mdp);
        let r = enumerate_return_distribution(&mdp, &pi, 0, 3).unwrap();
        assert!((r.tail_bound - 0.125 / 0.5).abs() < 1e-15);
        assert!(enumerate_return_distribution(&mdp, &pi, 0, 0).is_err());
    }

    #[test]
    fn dynamic_programming_matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let mdp = TabularMdp::random(2, 2, 0.8, &mut rng).unwrap();
            let pi = TabularPolicy::random(&mdp, &mut rng);
            // 2 actions × 2 rewards × 2 states = 8 branches per step
            let horizon = 3;
            let dp = enumerate_return_distribution(&mdp, &pi, 0, horizon).unwrap().distribution;
            let paths = enumerate_paths(&mdp, &pi, 0, horizon, 1 << 10).unwrap();
            assert_eq!(dp.values().len(), paths.values().len());
            for ((a, pa), (b, pb)) in dp.atoms().zip(paths.atoms()) {
                assert!((a - b).abs() <= MERGE_TOL, "{a} vs {b}");
                assert!((pa - pb).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oversize_enumeration_is_resource_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mdp = TabularMdp::random(2, 2, 0.8, &mut rng).unwrap();
        let pi = TabularPolicy::random(&mdp, &mut rng);
        assert!(matches!(enumerate_paths(&mdp, &pi, 0, 6, 1 << 10), Err(Error::Resource(_))));
    }
}
