use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    RmsProp { alpha: f64, eps: f64 },
}

impl OptimizerKind {
    pub const ADAM: Self = Self::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
    /// FPN optimizer settings.
    pub const RMSPROP: Self = Self::RmsProp {
        alpha: 0.95,
        eps: 1e-5,
    };
}

/// Per-parameter optimizer state for one flat parameter vector.
///
/// Adam keeps first and second moments; RMSprop only uses the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub step: u64,
    #[serde(skip)]
    first: Vec<f64>,
    #[serde(skip)]
    second: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64, num_params: usize) -> Self {
        let first = match kind {
            OptimizerKind::Adam { .. } => vec![0.0; num_params],
            OptimizerKind::RmsProp { .. } => Vec::new(),
        };
        Self {
            kind,
            lr,
            step: 0,
            first,
            second: vec![0.0; num_params],
        }
    }

    pub fn adam(lr: f64, num_params: usize) -> Self {
        Self::new(OptimizerKind::ADAM, lr, num_params)
    }

    pub fn rmsprop(lr: f64, num_params: usize) -> Self {
        Self::new(OptimizerKind::RMSPROP, lr, num_params)
    }

    pub fn num_params(&self) -> usize {
        self.second.len()
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second
    }

    /// Moments concatenated, for checkpointing.
    pub fn moments(&self) -> Vec<f64> {
        self.first.iter().chain(&self.second).copied().collect()
    }

    pub fn restore_moments(&mut self, moments: &[f64]) -> Result<()> {
        let n = self.second.len();
        if moments.len() != self.first.len() + n {
            return Err(invalid!("optimizer moment blob has wrong length {}", moments.len()));
        }
        let (a, b) = moments.split_at(self.first.len());
        self.first.copy_from_slice(a);
        self.second.copy_from_slice(b);
        Ok(())
    }

    /// One in-place update of `params` along `-grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let n = self.second.len();
        if params.len() != n || grads.len() != n {
            return Err(invalid!(
                "optimizer holds {n} parameters, got {} parameters and {} gradients",
                params.len(),
                grads.len()
            ));
        }
        self.step += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, &g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerKind::RmsProp { alpha, eps } => {
                for ((p, &g), v) in params.iter_mut().zip(grads).zip(self.second.iter_mut()) {
                    *v = alpha * *v + (1.0 - alpha) * g * g;
                    *p -= lr * g / (v.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// Applies one optimizer step to `params`.
pub fn optimizer_step(state: &mut OptimizerState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    state.step(params, grads)
}
