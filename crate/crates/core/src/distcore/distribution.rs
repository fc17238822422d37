use super::fractions::{fixed_fractions, FractionSet};
use crate::error::invalid;
use crate::Result;

/// Tolerance used when comparing cumulative probabilities.
pub(crate) const CDF_TOL: f64 = 1e-12;

/// Quantile values `θᵢ` attached to a [`FractionSet`]: `θᵢ` estimates the
/// quantile function at midpoint `τ̂ᵢ`. Values may cross.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileDistribution {
    fractions: FractionSet,
    values: Vec<f64>,
}

impl QuantileDistribution {
    pub fn new(fractions: FractionSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != fractions.len() {
            return Err(invalid!(
                "{} quantile values for {} fractions",
                values.len(),
                fractions.len()
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid!("non-finite quantile value {v}"));
        }
        Ok(Self { fractions, values })
    }

    pub fn fractions(&self) -> &FractionSet {
        &self.fractions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The atoms as a discrete distribution with masses `τᵢ₊₁ − τᵢ`.
    pub fn to_discrete(&self) -> Result<DiscreteDistribution> {
        DiscreteDistribution::new(
            self.values
                .iter()
                .copied()
                .zip(self.fractions.widths())
                .collect(),
        )
    }
}

/// Finitely supported distribution with atoms sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl DiscreteDistribution {
    /// Sorts `(value, probability)` atoms and merges exactly equal values.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid!("distribution needs at least one atom"));
        }
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(invalid!("non-finite atom value {v}"));
            }
            if !(p > 0.0) || !p.is_finite() {
                return Err(invalid!("atom probability must be positive, got {p}"));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > CDF_TOL {
            return Err(invalid!("probabilities sum to {total}, not 1"));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut probs: Vec<f64> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match values.last() {
                Some(&last) if last == v => *probs.last_mut().unwrap() += p,
                _ => {
                    values.push(v);
                    probs.push(p);
                }
            }
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { values, probs, cdf })
    }

    /// Equal-weight distribution over `samples`.
    pub fn uniform(samples: &[f64]) -> Result<Self> {
        let p = 1.0 / samples.len().max(1) as f64;
        Self::new(samples.iter().map(|&v| (v, p)).collect())
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        Self::new(vec![(value, 1.0)])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(v, p)| v * p).sum()
    }

    /// `inf{x : F(x) ≥ ω}` for `ω ∈ (0, 1]`, unchecked.
    pub(crate) fn quantile(&self, omega: f64) -> f64 {
        let idx = self.cdf.partition_point(|&c| c < omega - CDF_TOL);
        self.values[idx.min(self.values.len() - 1)]
    }
}

/// Generalized inverse CDF `inf{x : F(x) ≥ ω}`.
pub fn inverse_cdf(d: &DiscreteDistribution, omega: f64) -> Result<f64> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(invalid!("omega must lie in (0, 1], got {omega}"));
    }
    Ok(d.quantile(omega))
}

/// Merged CDF breakpoints of `u` and `v` in `[0, 1]`, deduplicated at
/// [`CDF_TOL`]. Both inverse CDFs are constant between consecutive entries.
fn merged_breakpoints(u: &DiscreteDistribution, v: &DiscreteDistribution) -> Vec<f64> {
    let mut points: Vec<f64> = std::iter::once(0.0)
        .chain(u.cdf.iter().copied())
        .chain(v.cdf.iter().copied())
        .map(|c| c.clamp(0.0, 1.0))
        .collect();
    points.push(1.0);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|b, a| *b - *a <= CDF_TOL);
    *points.last_mut().unwrap() = 1.0;
    points
}

/// Exact `W_p` between two discrete distributions via their inverse CDFs.
pub fn wasserstein_p(u: &DiscreteDistribution, v: &DiscreteDistribution, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid!("Wasserstein order must be a finite p >= 1, got {p}"));
    }
    let points = merged_breakpoints(u, v);
    let total: f64 = points
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let gap = (u.quantile(mid) - v.quantile(mid)).abs();
            let width = w[1] - w[0];
            if p == 1.0 {
                gap * width
            } else {
                gap.powf(p) * width
            }
        })
        .sum();
    Ok(if p == 1.0 { total } else { total.powf(1.0 / p) })
}

/// `W_∞`: the largest inverse-CDF gap over intervals of positive mass.
pub fn wasserstein_inf(u: &DiscreteDistribution, v: &DiscreteDistribution) -> f64 {
    merged_breakpoints(u, v)
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (u.quantile(mid) - v.quantile(mid)).abs()
        })
        .fold(0.0, f64::max)
}

/// W1-optimal `n`-atom equal-weight approximation: `θᵢ = F⁻¹(τ̂ᵢ)`.
pub fn project_w1(d: &DiscreteDistribution, n: usize) -> Result<QuantileDistribution> {
    let fractions = fixed_fractions(n)?;
    let values = fractions.midpoints().iter().map(|&t| d.quantile(t)).collect();
    QuantileDistribution::new(fractions, values)
}

/// `Σᵢ (τᵢ₊₁ − τᵢ) θᵢ`, the mean implied by the quantile atoms.
pub fn fqf_mean(q: &QuantileDistribution) -> f64 {
    q.fractions()
        .widths()
        .zip(q.values())
        .map(|(w, v)| w * v)
        .sum()
}

/// `∂W₁/∂τᵢ = 2F⁻¹(τᵢ) − F⁻¹(τ̂ᵢ) − F⁻¹(τ̂ᵢ₋₁)` for every interior boundary.
pub fn w1_fraction_gradient(quantile_fn: impl Fn(f64) -> f64, fractions: &FractionSet) -> Vec<f64> {
    let mids = fractions.midpoints();
    fractions
        .interior()
        .iter()
        .enumerate()
        .map(|(k, &tau)| 2.0 * quantile_fn(tau) - quantile_fn(mids[k + 1]) - quantile_fn(mids[k]))
        .collect()
}

/// Same as [`w1_fraction_gradient`] from precomputed values at the interior
/// boundaries and at the midpoints.
pub(crate) fn w1_fraction_gradient_from_values(boundary_values: &[f64], mid_values: &[f64]) -> Vec<f64> {
    boundary_values
        .iter()
        .enumerate()
        .map(|(k, &b)| 2.0 * b - mid_values[k + 1] - mid_values[k])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distcore::sample_fractions;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn four_atoms() -> DiscreteDistribution {
        DiscreteDistribution::uniform(&[0.0, 1.0, 2.0, 3.0]).unwrap()
    }

    fn random_distribution<R: Rng>(rng: &mut R, max_atoms: usize) -> DiscreteDistribution {
        let k = rng.random_range(1..=max_atoms);
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        DiscreteDistribution::new(
            weights
                .iter()
                .map(|w| (rng.random_range(-2.0..2.0), w / total))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn inverse_cdf_examples() {
        let c = DiscreteDistribution::point_mass(1.7).unwrap();
        for w in [1e-9, 0.3, 1.0] {
            assert_eq!(inverse_cdf(&c, w).unwrap(), 1.7);
        }
        assert_eq!(inverse_cdf(&four_atoms(), 0.25).unwrap(), 0.0);
        assert_eq!(inverse_cdf(&four_atoms(), 0.75).unwrap(), 2.0);
        assert_eq!(inverse_cdf(&four_atoms(), 0.2500001).unwrap(), 1.0);
        assert!(inverse_cdf(&four_atoms(), 0.0).is_err());
        assert!(inverse_cdf(&four_atoms(), -0.1).is_err());
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(DiscreteDistribution::new(vec![]).is_err());
        assert!(DiscreteDistribution::new(vec![(0.0, 0.5)]).is_err());
        assert!(DiscreteDistribution::new(vec![(0.0, 1.5), (1.0, -0.5)]).is_err());
        assert!(DiscreteDistribution::new(vec![(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn atoms_sorted_and_merged() {
        let d = DiscreteDistribution::new(vec![(2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]).unwrap();
        assert_eq!(d.values(), &[0.0, 2.0]);
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn wasserstein_examples() {
        let a = four_atoms();
        assert_eq!(wasserstein_p(&a, &a, 1.0).unwrap(), 0.0);
        let zero = DiscreteDistribution::point_mass(0.0).unwrap();
        let one = DiscreteDistribution::point_mass(1.0).unwrap();
        for p in [1.0, 2.0, 3.5] {
            assert!((wasserstein_p(&zero, &one, p).unwrap() - 1.0).abs() < 1e-15);
        }
        let two = DiscreteDistribution::uniform(&[0.0, 2.0]).unwrap();
        assert!((wasserstein_p(&two, &one, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(wasserstein_p(&two, &one, 0.5).is_err());
        assert_eq!(wasserstein_inf(&two, &one), 1.0);
    }

    #[test]
    fn projection_examples() {
        let c = DiscreteDistribution::point_mass(-3.0).unwrap();
        assert!(project_w1(&c, 5).unwrap().values().iter().all(|&v| v == -3.0));
        assert_eq!(project_w1(&four_atoms(), 2).unwrap().values(), &[0.0, 2.0]);
        assert!(project_w1(&c, 0).is_err());
    }

    #[test]
    fn fqf_mean_examples() {
        let q = QuantileDistribution::new(fixed_fractions(4).unwrap(), vec![1.0, 2.0, 4.0, 9.0]).unwrap();
        assert!((fqf_mean(&q) - 4.0).abs() < 1e-15);
        let fr = FractionSet::new(vec![0.0, 0.5, 1.0]).unwrap();
        let q = QuantileDistribution::new(fr, vec![0.25, 0.75]).unwrap();
        assert!((fqf_mean(&q) - 0.5).abs() < 1e-15);
        let fr = FractionSet::new(vec![0.0, 0.9, 1.0]).unwrap();
        let q = QuantileDistribution::new(fr, vec![1.0, 11.0]).unwrap();
        assert!((fqf_mean(&q) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fraction_gradient_examples() {
        let fr = sample_fractions(6, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(w1_fraction_gradient(|_| 4.2, &fr).iter().all(|&g| g == 0.0));
        for t in [0.1, 0.5, 0.8] {
            let fr = FractionSet::new(vec![0.0, t, 1.0]).unwrap();
            let g = w1_fraction_gradient(|w| w, &fr);
            assert!((g[0] - (t - 0.5)).abs() < 1e-15);
        }
        let fr = fixed_fractions(1).unwrap();
        assert!(w1_fraction_gradient(|w| w, &fr).is_empty());
    }

    #[test]
    fn quantile_distribution_validation() {
        let fr = fixed_fractions(2).unwrap();
        assert!(QuantileDistribution::new(fr.clone(), vec![1.0]).is_err());
        assert!(QuantileDistribution::new(fr.clone(), vec![1.0, f64::INFINITY]).is_err());
        // crossing quantiles are allowed
        assert!(QuantileDistribution::new(fr, vec![2.0, 1.0]).is_ok());
    }

    #[test]
    fn fqf_mean_of_projection_converges_to_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = random_distribution(&mut rng, 10);
        // the mean error is bounded by W1, which cannot grow when the atom
        // count doubles
        let mut last = f64::INFINITY;
        for n in [2, 4, 8, 16, 32] {
            let proj = project_w1(&d, n).unwrap();
            let w1 = wasserstein_p(&d, &proj.to_discrete().unwrap(), 1.0).unwrap();
            let err = (fqf_mean(&proj) - d.mean()).abs();
            assert!(err <= w1 + 1e-12, "n={n}: {err} > {w1}");
            assert!(w1 <= last + 1e-12, "n={n}: {w1} > {last}");
            last = w1;
        }
        assert!(last < 0.1);
        let exact = project_w1(&d, 1 << 16).unwrap();
        assert!((fqf_mean(&exact) - d.mean()).abs() < 1e-3);
    }

    #[test]
    fn wasserstein_metric_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let a = random_distribution(&mut rng, 6);
            let b = random_distribution(&mut rng, 6);
            let c = random_distribution(&mut rng, 6);
            for p in [1.0, 2.0] {
                let ab = wasserstein_p(&a, &b, p).unwrap();
                let ba = wasserstein_p(&b, &a, p).unwrap();
                let bc = wasserstein_p(&b, &c, p).unwrap();
                let ac = wasserstein_p(&a, &c, p).unwrap();
                assert!((ab - ba).abs() < 1e-12);
                assert!(ac <= ab + bc + 1e-12);
                assert_eq!(wasserstein_p(&a, &a, p).unwrap(), 0.0);
                assert_eq!(ab == 0.0, a == b);
            }
        }
    }

    proptest! {
        #[test]
        fn projection_scale_and_shift_equivariance(
            values in prop::collection::vec(-10.0f64..10.0, 1..10),
            scale in 0.01f64..100.0,
            shift in -50.0f64..50.0,
            n in 1usize..20,
        ) {
            let d = DiscreteDistribution::uniform(&values).unwrap();
            let base = project_w1(&d, n).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| scale * v).collect();
            let scaled = project_w1(&DiscreteDistribution::uniform(&scaled).unwrap(), n).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let shifted = project_w1(&DiscreteDistribution::uniform(&shifted).unwrap(), n).unwrap();
            for i in 0..n {
                prop_assert_eq!(scaled.values()[i], scale * base.values()[i]);
                prop_assert_eq!(shifted.values()[i], base.values()[i] + shift);
            }
        }
    }
}
