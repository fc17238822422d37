use crate::distcore::DiscreteDistribution;
use crate::error::invalid;
use crate::{Error, Result};

/// Largest `grid^n` search an instance may request.
pub const MAX_CANDIDATES: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub values: Vec<f64>,
    pub w1: f64,
}

/// `W1 = ∫ |F_u(x) − F_v(x)| dx`, integrating CDFs over the real line.
/// Kept separate from the inverse-CDF route used by the library.
pub fn w1_by_cdf(u: &[(f64, f64)], v: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64, f64)> = u
        .iter()
        .map(|&(x, p)| (x, p, 0.0))
        .chain(v.iter().map(|&(x, p)| (x, 0.0, p)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut fu, mut fv) = (0.0, 0.0);
    let mut total = 0.0;
    for pair in events.windows(2) {
        fu += pair[0].1;
        fv += pair[0].2;
        total += (fu - fv).abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// Exhaustive search over `n`-atom equal-weight distributions with atoms on
/// the grid `{lo + k·step}` spanning the support of `d`. Atom order does not
/// change the distribution, so only non-decreasing tuples are visited;
/// ties resolve to the lexicographically smallest tuple.
pub fn brute_force_w1_min(d: &DiscreteDistribution, n: usize, step: f64) -> Result<BruteForceResult> {
    if n == 0 {
        return Err(invalid!("number of atoms must be positive"));
    }
    if !(step > 0.0) {
        return Err(invalid!("grid step must be positive"));
    }
    let lo = (d.values()[0] / step).floor() * step;
    let hi = (d.values()[d.len() - 1] / step).ceil() * step;
    let points = ((hi - lo) / step).round() as usize + 1;
    if (points as f64).powi(n as i32) > MAX_CANDIDATES {
        return Err(Error::Resource(format!("{points}^{n} grid candidates")));
    }
    let grid: Vec<f64> = (0..points).map(|k| lo + k as f64 * step).collect();
    let target: Vec<(f64, f64)> = d.atoms().collect();
    let weight = 1.0 / n as f64;

    let mut idx = vec![0usize; n];
    let mut candidate = vec![(0.0, weight); n];
    let mut best = BruteForceResult {
        values: vec![grid[0]; n],
        w1: f64::INFINITY,
    };
    loop {
        for (c, &k) in candidate.iter_mut().zip(&idx) {
            c.0 = grid[k];
        }
        let w1 = w1_by_cdf(&target, &candidate);
        if w1 < best.w1 - 1e-12 {
            best.w1 = w1;
            best.values = candidate.iter().map(|c| c.0).collect();
        }
        // next non-decreasing tuple
        let mut pos = n;
        while pos > 0 && idx[pos - 1] == points - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        let v = idx[pos - 1];
        for k in idx[pos..].iter_mut() {
            *k = v;
        }
    }
    Ok(best)
}
