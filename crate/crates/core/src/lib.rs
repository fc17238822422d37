//! Quantile-based distributional critics for continuous-control actor-critic agents.
//!
//! The crate is organised bottom-up:
//!
//! - [`distcore`]: fraction sets, quantile Huber loss, Wasserstein distances,
//!   W1 projection and the fraction-proposal gradient.
//! - [`nn`]: a small MLP with explicit backpropagation, the cosine fraction
//!   embedding and Adam/RMSprop.
//! - [`critics`]: fixed, sampled and learned fraction critic heads.
//! - [`agents`]: distributional TD3 and SAC with replay and target networks.
//! - [`envs`]: deterministic toy control tasks and tabular MDPs.
//! - [`oracle`]: exact return distributions, projected Bellman iteration,
//!   tabular quantile TD, finite differences and brute-force W1 search.

pub mod agents;
pub mod critics;
pub mod distcore;
pub mod envs;
mod error;
pub mod nn;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
