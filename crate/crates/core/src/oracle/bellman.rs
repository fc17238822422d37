use crate::distcore::{project_w1, wasserstein_inf, DiscreteDistribution, QuantileDistribution};
use crate::envs::{TabularMdp, TabularPolicy};
use crate::error::invalid;
use crate::Result;

use super::enumerate::{merge_atoms, MAX_ATOMS};
use crate::Error;

/// Per-state `n`-atom representation with every value zero.
pub fn zero_representation(mdp: &TabularMdp, n: usize) -> Result<Vec<QuantileDistribution>> {
    let zero = project_w1(&DiscreteDistribution::point_mass(0.0)?, n)?;
    Ok(vec![zero; mdp.n_states()])
}

/// One application of the projected distributional Bellman operator: the
/// exact mixture of `r + γ·Z(s')` over actions, rewards and successors,
/// followed by the W1 quantile projection onto `n` equal-weight atoms.
/// Terminal successors contribute a zero return.
pub fn distributional_bellman_apply(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    current: &[QuantileDistribution],
    n: usize,
) -> Result<Vec<QuantileDistribution>> {
    policy.check(mdp)?;
    if current.len() != mdp.n_states() {
        return Err(invalid!("{} state distributions for {} states", current.len(), mdp.n_states()));
    }
    let gamma = mdp.gamma();
    let mut out = Vec::with_capacity(mdp.n_states());
    for s in 0..mdp.n_states() {
        if mdp.is_terminal(s) {
            out.push(project_w1(&DiscreteDistribution::point_mass(0.0)?, n)?);
            continue;
        }
        let mut atoms = Vec::new();
        for (a, &pa) in policy.probs(s).iter().enumerate() {
            for (s2, &ps) in mdp.transition(s, a).iter().enumerate() {
                let w = pa * ps;
                if w == 0.0 {
                    continue;
                }
                for &(r, pr) in mdp.reward_distribution(s, a) {
                    if mdp.is_terminal(s2) {
                        atoms.push((r, w * pr));
                        continue;
                    }
                    let z = &current[s2];
                    atoms.extend(
                        z.values()
                            .iter()
                            .zip(z.fractions().widths())
                            .map(|(&v, pz)| (r + gamma * v, w * pr * pz)),
                    );
                }
            }
            if atoms.len() > MAX_ATOMS {
                return Err(Error::Resource(format!("{} mixture atoms", atoms.len())));
            }
        }
        let mixture = renormalized(merge_atoms(atoms))?;
        out.push(project_w1(&mixture, n)?);
    }
    Ok(out)
}

/// Builds a distribution from atoms whose mass may drift from 1 by rounding.
fn renormalized(atoms: Vec<(f64, f64)>) -> Result<DiscreteDistribution> {
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    DiscreteDistribution::new(atoms.into_iter().map(|(v, p)| (v, p / total)).collect())
}

/// `d̄_∞`: the maximum over states of `W_∞` between two representations.
pub fn max_wasserstein_inf(a: &[QuantileDistribution], b: &[QuantileDistribution]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid!("representations cover different state counts"));
    }
    a.iter().zip(b).try_fold(0.0f64, |acc, (x, y)| {
        Ok(acc.max(wasserstein_inf(&x.to_discrete()?, &y.to_discrete()?)))
    })
}

/// Successive `d̄_∞` distances of the projected iteration started at zero.
/// Stops early once the distance falls below `floor`.
pub fn bellman_iterate_distances(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    n: usize,
    iterations: usize,
    floor: f64,
) -> Result<Vec<f64>> {
    let mut z = zero_representation(mdp, n)?;
    let mut distances = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let next = distributional_bellman_apply(mdp, policy, &z, n)?;
        let d = max_wasserstein_inf(&z, &next)?;
        distances.push(d);
        z = next;
        if d < floor {
            break;
        }
    }
    Ok(distances)
}
