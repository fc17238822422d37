use super::QuantileDistribution;
use crate::error::invalid;
use crate::Result;

/// Huber function `L_κ(u)`.
#[inline]
pub fn huber(u: f64, kappa: f64) -> f64 {
    let a = u.abs();
    if a <= kappa {
        0.5 * u * u
    } else {
        kappa * (a - 0.5 * kappa)
    }
}

#[inline]
fn huber_derivative(u: f64, kappa: f64) -> f64 {
    if u.abs() <= kappa {
        u
    } else {
        kappa * u.signum()
    }
}

#[inline]
fn asymmetry(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        1.0 - tau
    } else {
        tau
    }
}

/// `ρ_τ^κ(u) = |τ − 1{u<0}| · L_κ(u) / κ` without argument checks.
#[inline]
pub(crate) fn rho(u: f64, tau: f64, kappa: f64) -> f64 {
    asymmetry(u, tau) * huber(u, kappa) / kappa
}

/// `dρ/du`; zero at the kink `u = 0`.
#[inline]
pub(crate) fn rho_derivative(u: f64, tau: f64, kappa: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    asymmetry(u, tau) * huber_derivative(u, kappa) / kappa
}

/// Quantile Huber loss of a single residual `u = target − prediction`.
pub fn huber_quantile_loss(u: f64, tau: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(invalid!("kappa must be positive, got {kappa}"));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid!("tau must lie in [0, 1], got {tau}"));
    }
    Ok(rho(u, tau, kappa))
}

/// Pairwise loss over one sample, summing over predicted quantiles and
/// averaging over targets. `grad` is overwritten with `∂loss/∂θᵢ`.
pub(crate) fn pairwise_loss_into(
    taus: &[f64],
    values: &[f64],
    targets: &[f64],
    kappa: f64,
    grad: &mut [f64],
) -> f64 {
    let inv_m = 1.0 / targets.len() as f64;
    let mut loss = 0.0;
    for ((&tau, &theta), g) in taus.iter().zip(values).zip(grad.iter_mut()) {
        let mut l = 0.0;
        let mut d = 0.0;
        for &y in targets {
            let u = y - theta;
            l += rho(u, tau, kappa);
            d -= rho_derivative(u, tau, kappa);
        }
        loss += l * inv_m;
        *g = d * inv_m;
    }
    loss
}

/// `(1/M) Σ_j Σ_i ρ_{τ̂ᵢ}^κ(y_j − θᵢ)` and its exact gradient in the `θᵢ`.
pub fn pairwise_qr_loss(
    predicted: &QuantileDistribution,
    target_values: &[f64],
    kappa: f64,
) -> Result<(f64, Vec<f64>)> {
    if target_values.is_empty() {
        return Err(invalid!("target list must not be empty"));
    }
    if !(kappa > 0.0) {
        return Err(invalid!("kappa must be positive, got {kappa}"));
    }
    let mut grad = vec![0.0; predicted.len()];
    let loss = pairwise_loss_into(
        predicted.fractions().midpoints(),
        predicted.values(),
        target_values,
        kappa,
        &mut grad,
    );
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distcore::{fixed_fractions, sample_fractions, FractionSet};
    use crate::oracle::finite_diff_check;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_residual() {
        for tau in [0.0, 0.3, 1.0] {
            assert_eq!(huber_quantile_loss(0.0, tau, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn linear_branch() {
        assert!((huber_quantile_loss(2.0, 0.5, 1.0).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn quadratic_branch() {
        assert!((huber_quantile_loss(-0.5, 0.9, 1.0).unwrap() - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn bad_kappa_rejected() {
        assert!(huber_quantile_loss(1.0, 0.5, 0.0).is_err());
        assert!(huber_quantile_loss(1.0, 0.5, -1.0).is_err());
        assert!(huber_quantile_loss(1.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn four_term_example() {
        let fr = FractionSet::new(vec![0.0, 0.5, 1.0]).unwrap();
        let q = QuantileDistribution::new(fr, vec![0.0, 1.0]).unwrap();
        let (loss, _) = pairwise_qr_loss(&q, &[0.0, 1.0], 1.0).unwrap();
        assert!((loss - 0.125).abs() < 1e-15);
    }

    #[test]
    fn constant_targets_match_constant_prediction() {
        let q = QuantileDistribution::new(fixed_fractions(5).unwrap(), vec![2.5; 5]).unwrap();
        let (loss, grad) = pairwise_qr_loss(&q, &[2.5; 3], 1.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn empty_targets_rejected() {
        let q = QuantileDistribution::new(fixed_fractions(2).unwrap(), vec![0.0, 1.0]).unwrap();
        assert!(pairwise_qr_loss(&q, &[], 1.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 50 {
            let n = rng.random_range(1..8);
            let m = rng.random_range(1..8);
            let kappa = rng.random_range(0.2..2.0);
            let fr = sample_fractions(n, &mut rng).unwrap();
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let targets: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let near_kink = values
                .iter()
                .any(|v| targets.iter().any(|y| (y - v).abs() < 1e-4));
            if near_kink {
                continue;
            }
            let q = QuantileDistribution::new(fr.clone(), values.clone()).unwrap();
            let (_, grad) = pairwise_qr_loss(&q, &targets, kappa).unwrap();
            let f = |p: &[f64]| {
                let q = QuantileDistribution::new(fr.clone(), p.to_vec()).unwrap();
                pairwise_qr_loss(&q, &targets, kappa).unwrap().0
            };
            let err = finite_diff_check(f, &values, &grad, 1e-6);
            assert!(err < 1e-6, "relative error {err}");
            checked += 1;
        }
    }

    proptest! {
        #[test]
        fn loss_nonnegative_and_zero_iff_all_residuals_zero(
            values in prop::collection::vec(-5.0f64..5.0, 1..6),
            targets in prop::collection::vec(-5.0f64..5.0, 1..6),
            kappa in 0.1f64..3.0,
        ) {
            let q = QuantileDistribution::new(fixed_fractions(values.len()).unwrap(), values.clone()).unwrap();
            let (loss, _) = pairwise_qr_loss(&q, &targets, kappa).unwrap();
            prop_assert!(loss >= 0.0);
            let all_zero = values.iter().all(|v| targets.iter().all(|y| y - v == 0.0));
            prop_assert_eq!(loss == 0.0, all_zero);
        }
    }
}
