//! Quantile-distribution mathematics.
//!
//! Everything here is pure: values in, values out. Randomness enters only
//! through the explicit generator handed to [`sample_fractions`].

mod distribution;
mod fractions;
mod loss;

pub use distribution::{
    fqf_mean, inverse_cdf, project_w1, w1_fraction_gradient, wasserstein_inf, wasserstein_p,
    DiscreteDistribution, QuantileDistribution,
};
pub(crate) use distribution::w1_fraction_gradient_from_values;
pub use fractions::{fixed_fractions, fractions_from_logits, sample_fractions, softmax, FractionSet};
pub use loss::{huber, huber_quantile_loss, pairwise_qr_loss};
pub(crate) use loss::{pairwise_loss_into, rho_derivative};
