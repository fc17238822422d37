//! Rank test used to compare final returns between groups of seeds.

use crate::{HarnessError, HarnessResult};

/// Largest combined sample the exact null distribution is built for.
pub const MAX_EXACT: usize = 200;

/// Midranks (1-based) of the pooled sample; ties share their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Mann-Whitney U statistic of `x` against `y`: the number of pairs with
/// `x > y`, ties counting one half.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .map(|&a| {
            y.iter()
                .map(|&b| if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 })
                .sum::<f64>()
        })
        .sum()
}

/// One-sided exact p-value for "`x` tends to exceed `y`": the probability,
/// over all equally likely assignments of the pooled midranks to a group of
/// size `|x|`, that the group's rank sum is at least the observed one.
pub fn mann_whitney_greater(x: &[f64], y: &[f64]) -> HarnessResult<f64> {
    let (n1, n) = (x.len(), x.len() + y.len());
    if x.is_empty() || y.is_empty() {
        return Err(HarnessError::Other("both samples must be non-empty".into()));
    }
    if n > MAX_EXACT {
        return Err(HarnessError::Other(format!("{n} observations exceed the exact-test limit")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(HarnessError::Other("samples must be finite".into()));
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    // doubled midranks are integers
    let ranks: Vec<usize> = midranks(&pooled).iter().map(|r| (2.0 * r).round() as usize).collect();
    let observed: usize = ranks[..n1].iter().sum();
    let max_sum: usize = ranks.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in &ranks {
        for k in (1..=n1).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            for s in (r..=max_sum).rev() {
                hi[0][s] += lo[k - 1][s - r];
            }
        }
    }
    let total: f64 = ways[n1].iter().sum();
    let tail: f64 = ways[n1][observed..].iter().sum();
    Ok(tail / total)
}
