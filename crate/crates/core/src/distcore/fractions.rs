use rand::Rng;

use crate::error::invalid;
use crate::Result;

/// Sorted quantile-fraction boundaries `0 = τ₀ < τ₁ < … < τ_N = 1` and the
/// midpoints `τ̂ᵢ = (τᵢ + τᵢ₊₁) / 2` at which quantile values are estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionSet {
    boundaries: Vec<f64>,
    midpoints: Vec<f64>,
}

impl FractionSet {
    /// Validates `boundaries` and derives the midpoints.
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(invalid!("a fraction set needs at least two boundaries"));
        }
        if boundaries[0] != 0.0 || *boundaries.last().unwrap() != 1.0 {
            return Err(invalid!("fraction boundaries must start at 0 and end at 1"));
        }
        if let Some(w) = boundaries.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(invalid!(
                "fraction boundaries must be strictly increasing (got {} then {})",
                w[0],
                w[1]
            ));
        }
        let midpoints = boundaries.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self {
            boundaries,
            midpoints,
        })
    }

    /// Number of atoms `N` (one per midpoint).
    pub fn len(&self) -> usize {
        self.midpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.midpoints.is_empty()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Interior boundaries `τ₁ … τ_{N−1}`.
    pub fn interior(&self) -> &[f64] {
        &self.boundaries[1..self.boundaries.len() - 1]
    }

    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    /// Probability mass `τᵢ₊₁ − τᵢ` carried by each atom.
    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.boundaries.windows(2).map(|w| w[1] - w[0])
    }
}

/// Equidistant fractions `{i/n}` with midpoints `{(2i+1)/(2n)}`.
pub fn fixed_fractions(n: usize) -> Result<FractionSet> {
    if n == 0 {
        return Err(invalid!("number of fractions must be positive"));
    }
    let mut boundaries: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    boundaries[n] = 1.0;
    FractionSet::new(boundaries)
}

/// `n − 1` interior boundaries drawn i.i.d. uniform on (0, 1) and sorted.
///
/// A draw with duplicate (or zero) interior points is discarded and redrawn
/// as a whole.
pub fn sample_fractions<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<FractionSet> {
    if n == 0 {
        return Err(invalid!("number of fractions must be positive"));
    }
    let mut interior = vec![0.0; n - 1];
    loop {
        for x in interior.iter_mut() {
            *x = rng.random::<f64>();
        }
        interior.sort_by(f64::total_cmp);
        let distinct = interior.windows(2).all(|w| w[0] < w[1]);
        if distinct && interior.first().is_none_or(|&x| x > 0.0) {
            break;
        }
    }
    let mut boundaries = Vec::with_capacity(n + 1);
    boundaries.push(0.0);
    boundaries.extend_from_slice(&interior);
    boundaries.push(1.0);
    FractionSet::new(boundaries)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Boundaries from the cumulative sum of `softmax(logits)`, with the last
/// boundary pinned to exactly 1.
pub fn fractions_from_logits(logits: &[f64]) -> Result<FractionSet> {
    if logits.is_empty() {
        return Err(invalid!("at least one logit is required"));
    }
    if let Some(z) = logits.iter().find(|z| !z.is_finite()) {
        return Err(invalid!("non-finite logit {z}"));
    }
    let probs = softmax(logits);
    let mut boundaries = Vec::with_capacity(logits.len() + 1);
    boundaries.push(0.0);
    let mut acc = 0.0;
    for p in &probs[..probs.len() - 1] {
        acc += p;
        boundaries.push(acc);
    }
    boundaries.push(1.0);
    FractionSet::new(boundaries)
        .map_err(|e| invalid!("logits produce degenerate fractions: {e}"))
}
