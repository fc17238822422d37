//! Brute-force ground truth for the distributional machinery.
//!
//! Nothing in here is used on the training path; these routines exist to
//! check the library against exact answers on small instances.

mod bellman;
mod brute;
mod enumerate;
mod gradcheck;
pub mod quadrature;
mod tabular_td;

pub use bellman::{
    bellman_iterate_distances, distributional_bellman_apply, max_wasserstein_inf, zero_representation,
};
pub use brute::{brute_force_w1_min, w1_by_cdf, BruteForceResult, MAX_CANDIDATES};
pub use enumerate::{enumerate_paths, enumerate_return_distribution, ReturnDistribution, MAX_ATOMS, MERGE_TOL};
pub use gradcheck::finite_diff_check;
pub use tabular_td::{tabular_quantile_td, LearningRate, TabularTdConfig};
