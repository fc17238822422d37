//! Distributional critic heads over `(state, action)`.
//!
//! All three strategies share a trunk (`Linear → act`) and a head that emits
//! quantile values. They differ in where the fractions come from:
//!
//! - `Fixed`: equidistant fractions, one head output per atom.
//! - `Sampled`: fractions drawn afresh per sample, embedded with cosines and
//!   multiplied into the trunk features; one head evaluation per fraction.
//! - `Learned`: as `Sampled`, but a linear fraction-proposal layer picks the
//!   fractions from the (gradient-stopped) trunk features.

mod critic;
mod fpn;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::nn::{Activation, DEFAULT_N_COS};
use crate::Result;

pub use critic::{BatchQuantiles, CriticManifest, DistCritic};
pub use fpn::FractionProposer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Fixed,
    Sampled,
    Learned,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Fixed, Strategy::Sampled, Strategy::Learned];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Fixed => "fixed",
            Strategy::Sampled => "sampled",
            Strategy::Learned => "learned",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" | "qr" => Ok(Strategy::Fixed),
            "sampled" | "iqn" => Ok(Strategy::Sampled),
            "learned" | "fqf" => Ok(Strategy::Learned),
            _ => Err(invalid!("unknown fraction strategy '{s}'")),
        }
    }
}

/// Per-sample TD loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Pairwise quantile Huber loss.
    #[default]
    Quantile,
    /// `½(y − θ)²` averaged over targets: the plain expected-value critic.
    /// Only meaningful with a single fixed atom.
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub strategy: Strategy,
    pub n_atoms: usize,
    pub kappa: f64,
    /// Hidden widths. The first is the trunk; the cosine embedding has the
    /// same width so it can be multiplied into the trunk features.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub n_cos: usize,
    #[serde(default)]
    pub loss: LossKind,
}

impl CriticConfig {
    pub fn new(strategy: Strategy, n_atoms: usize) -> Self {
        Self {
            strategy,
            n_atoms,
            kappa: 1.0,
            hidden: vec![256, 256],
            activation: Activation::Tanh,
            n_cos: DEFAULT_N_COS,
            loss: LossKind::Quantile,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(invalid!("n_atoms must be at least 1"));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(invalid!("kappa must be positive and finite, got {}", self.kappa));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(invalid!("hidden widths must be a non-empty list of positive sizes"));
        }
        if self.n_cos == 0 {
            return Err(invalid!("n_cos must be positive"));
        }
        if self.loss == LossKind::Squared && (self.strategy != Strategy::Fixed || self.n_atoms != 1) {
            return Err(invalid!("the squared loss needs a single fixed atom"));
        }
        Ok(())
    }
}
