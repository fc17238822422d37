use std::f64::consts::{LN_2, PI};

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::nn::{Activation, Mlp, OptimizerState};
use crate::Result;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorKind {
    /// `a = tanh(net(s))`.
    Deterministic,
    /// `a = tanh(μ + σ·ε)`, with `μ` and `log σ` from one output layer.
    Gaussian,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(1 − tanh²u)` without cancellation for large `|u|`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

/// Policy network acting in the normalized action box `[-1, 1]^d`.
#[derive(Debug, Clone)]
pub struct Actor {
    kind: ActorKind,
    action_dim: usize,
    net: Mlp,
    optimizer: OptimizerState,
}

/// Reparameterized Gaussian sample for one batch.
struct Squashed {
    actions: Array2<f64>,
    log_probs: Vec<f64>,
    noise: Array2<f64>,
    std: Array2<f64>,
    /// Log-std entries outside the clamp range carry no gradient.
    clamped: Array2<bool>,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(
        kind: ActorKind,
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        lr: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if action_dim == 0 {
            return Err(invalid!("action dimension must be positive"));
        }
        let out = match kind {
            ActorKind::Deterministic => action_dim,
            ActorKind::Gaussian => 2 * action_dim,
        };
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(out);
        let mut acts = vec![activation; hidden.len()];
        acts.push(match kind {
            ActorKind::Deterministic => Activation::Tanh,
            ActorKind::Gaussian => Activation::Identity,
        });
        Self::from_net(kind, action_dim, Mlp::new(&sizes, &acts, rng)?, lr)
    }

    pub fn from_net(kind: ActorKind, action_dim: usize, net: Mlp, lr: f64) -> Result<Self> {
        let expected = match kind {
            ActorKind::Deterministic => action_dim,
            ActorKind::Gaussian => 2 * action_dim,
        };
        if net.output_dim() != expected {
            return Err(invalid!("{kind:?} actor over {action_dim} actions needs {expected} outputs"));
        }
        if !(lr >= 0.0) {
            return Err(invalid!("learning rate must be non-negative, got {lr}"));
        }
        let optimizer = OptimizerState::adam(lr, net.num_params());
        Ok(Self {
            kind,
            action_dim,
            net,
            optimizer,
        })
    }

    pub fn kind(&self) -> ActorKind {
        self.kind
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn optimizer_mut(&mut self) -> &mut OptimizerState {
        &mut self.optimizer
    }

    /// Noise-free action: the network output, or `tanh(μ)` for the Gaussian.
    pub fn deterministic(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        let out = self.net.infer(states)?;
        Ok(match self.kind {
            ActorKind::Deterministic => out,
            ActorKind::Gaussian => out.slice(s![.., ..self.action_dim]).mapv(f64::tanh),
        })
    }

    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        let s = ArrayView2::from_shape((1, state.len()), state).map_err(|e| invalid!("{e}"))?;
        Ok(self.deterministic(s)?.into_raw_vec_and_offset().0)
    }

    fn squash<R: Rng + ?Sized>(&self, out: &Array2<f64>, rng: &mut R) -> Squashed {
        let d = self.action_dim;
        let batch = out.nrows();
        let noise = Array2::from_shape_fn((batch, d), |_| rng.sample::<f64, _>(StandardNormal));
        let raw = out.slice(s![.., d..]);
        let clamped = raw.mapv(|l| !(LOG_STD_MIN..=LOG_STD_MAX).contains(&l));
        let log_std = raw.mapv(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX));
        let std = log_std.mapv(f64::exp);
        let mut actions = Array2::zeros((batch, d));
        let mut log_probs = vec![0.0; batch];
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        for b in 0..batch {
            for i in 0..d {
                let eps = noise[[b, i]];
                let u = out[[b, i]] + std[[b, i]] * eps;
                actions[[b, i]] = u.tanh();
                log_probs[b] += -0.5 * eps * eps - log_std[[b, i]] - half_log_2pi - log_one_minus_tanh_sq(u);
            }
        }
        Squashed {
            actions,
            log_probs,
            noise,
            std,
            clamped,
        }
    }

    /// Stochastic action and its log-density. The deterministic actor
    /// returns its plain output and zero log-densities.
    pub fn sample<R: Rng + ?Sized>(&self, states: ArrayView2<f64>, rng: &mut R) -> Result<(Array2<f64>, Vec<f64>)> {
        match self.kind {
            ActorKind::Deterministic => Ok((self.net.infer(states)?, vec![0.0; states.nrows()])),
            ActorKind::Gaussian => {
                let sq = self.squash(&self.net.infer(states)?, rng);
                Ok((sq.actions, sq.log_probs))
            }
        }
    }

    /// Loss `mean(α·log π(a|s) − q(s, a))` at reparameterized actions and its
    /// gradient in the actor parameters; `α` is ignored by the deterministic
    /// actor. `q_fn(actions)` returns per-sample values and `∂q/∂a`.
    pub fn objective_grad<R: Rng + ?Sized>(
        &mut self,
        states: ArrayView2<f64>,
        alpha: f64,
        rng: &mut R,
        mut q_fn: impl FnMut(ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)>,
    ) -> Result<(f64, Vec<f64>)> {
        let batch = states.nrows();
        if batch == 0 {
            return Err(invalid!("empty batch"));
        }
        let scale = 1.0 / batch as f64;
        let out = self.net.forward(states)?;
        let d = self.action_dim;
        let (loss, d_out) = match self.kind {
            ActorKind::Deterministic => {
                let (q, dq) = q_fn(out.view())?;
                check_q(&q, &dq, batch, d)?;
                (-q.iter().sum::<f64>() * scale, dq.mapv(|g| -g * scale))
            }
            ActorKind::Gaussian => {
                let sq = self.squash(&out, rng);
                let (q, dq) = q_fn(sq.actions.view())?;
                check_q(&q, &dq, batch, d)?;
                let loss = q.iter().zip(&sq.log_probs).map(|(q, lp)| alpha * lp - q).sum::<f64>() * scale;
                let mut d_out = Array2::zeros((batch, 2 * d));
                for b in 0..batch {
                    for i in 0..d {
                        let a = sq.actions[[b, i]];
                        let du = -dq[[b, i]] * scale * (1.0 - a * a) + alpha * scale * 2.0 * a;
                        d_out[[b, i]] = du;
                        d_out[[b, d + i]] = if sq.clamped[[b, i]] {
                            0.0
                        } else {
                            du * sq.std[[b, i]] * sq.noise[[b, i]] - alpha * scale
                        };
                    }
                }
                (loss, d_out)
            }
        };
        let (grads, _) = self.net.backward(d_out.view())?;
        Ok((loss, grads))
    }

    pub fn apply_gradients(&mut self, grads: &[f64]) -> Result<()> {
        self.optimizer.step(self.net.params_mut(), grads)
    }

    pub fn polyak_from(&mut self, online: &Actor, tau: f64) -> Result<()> {
        self.net.polyak_from(&online.net, tau)
    }
}

fn check_q(q: &[f64], dq: &Array2<f64>, batch: usize, d: usize) -> Result<()> {
    if q.len() != batch || dq.dim() != (batch, d) {
        return Err(invalid!("critic returned {} values and a {:?} action gradient for batch {batch}", q.len(), dq.dim()));
    }
    Ok(())
}
