use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::distcore::{fractions_from_logits, softmax, w1_fraction_gradient_from_values, FractionSet};
use crate::error::invalid;
use crate::nn::{Activation, Mlp, OptimizerState};
use crate::Result;

/// `∂/∂z` of `Σᵢ gᵢ·τᵢ` where `τᵢ = p₁ + … + pᵢ` and `p = softmax(z)`.
fn logit_gradient(probs: &[f64], g: &[f64]) -> Vec<f64> {
    let n = probs.len();
    let mut d_probs = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..n - 1).rev() {
        acc += g[j];
        d_probs[j] = acc;
    }
    let dot: f64 = probs.iter().zip(&d_probs).map(|(p, d)| p * d).sum();
    probs.iter().zip(&d_probs).map(|(p, d)| p * (d - dot)).collect()
}

/// Single linear layer from features to `n` logits; fractions are the
/// cumulative softmax. Trained by RMSprop on the W1 fraction gradient.
#[derive(Debug, Clone)]
pub struct FractionProposer {
    layer: Mlp,
    optimizer: OptimizerState,
}

impl FractionProposer {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, n_atoms: usize, lr: f64, rng: &mut R) -> Result<Self> {
        let layer = Mlp::new(&[input_dim, n_atoms], &[Activation::Identity], rng)?;
        Self::from_layer(layer, lr)
    }

    pub fn from_layer(layer: Mlp, lr: f64) -> Result<Self> {
        if layer.sizes().len() != 2 || layer.activations() != [Activation::Identity] {
            return Err(invalid!("fraction proposer must be a single linear layer"));
        }
        if !(lr >= 0.0) {
            return Err(invalid!("learning rate must be non-negative, got {lr}"));
        }
        let optimizer = OptimizerState::rmsprop(lr, layer.num_params());
        Ok(Self { layer, optimizer })
    }

    pub fn n_atoms(&self) -> usize {
        self.layer.output_dim()
    }

    pub fn layer(&self) -> &Mlp {
        &self.layer
    }

    pub fn layer_mut(&mut self) -> &mut Mlp {
        &mut self.layer
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn optimizer_mut(&mut self) -> &mut OptimizerState {
        &mut self.optimizer
    }

    pub fn logits(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.layer.infer(features)
    }

    pub fn propose(&self, features: ArrayView2<f64>) -> Result<Vec<FractionSet>> {
        let logits = self.layer.infer(features)?;
        logits
            .rows()
            .into_iter()
            .map(|row| fractions_from_logits(&row.to_vec()))
            .collect()
    }

    /// One RMSprop step on the proposal layer.
    ///
    /// `quantile_fn(taus, k)` receives `B·k` fractions (row-major, `k = 2n−1`
    /// per sample: the interior boundaries, then the midpoints) and returns a
    /// `B × k` matrix of quantile values; it is treated as a constant.
    /// Returns the batch mean of `Σᵢ gᵢ·τᵢ`, whose gradient in the logits
    /// is the one applied.
    pub fn update(
        &mut self,
        features: ArrayView2<f64>,
        mut quantile_fn: impl FnMut(&[f64], usize) -> Result<Array2<f64>>,
    ) -> Result<f64> {
        let n = self.n_atoms();
        let batch = features.nrows();
        if batch == 0 {
            return Err(invalid!("empty batch"));
        }
        if n == 1 {
            return Ok(0.0);
        }
        let logits = self.layer.forward(features)?;
        let mut probs = Vec::with_capacity(batch);
        let k = 2 * n - 1;
        let mut taus = Vec::with_capacity(batch * k);
        for row in logits.rows() {
            let row = row.to_vec();
            let fr = fractions_from_logits(&row)?;
            taus.extend_from_slice(fr.interior());
            taus.extend_from_slice(fr.midpoints());
            probs.push(softmax(&row));
        }
        let values = quantile_fn(&taus, k)?;
        if values.dim() != (batch, k) {
            return Err(invalid!("quantile function returned shape {:?}, expected {:?}", values.dim(), (batch, k)));
        }

        let scale = 1.0 / batch as f64;
        let mut d_logits = Array2::zeros((batch, n));
        let mut loss = 0.0;
        for b in 0..batch {
            let row = values.row(b).to_vec();
            let g = w1_fraction_gradient_from_values(&row[..n - 1], &row[n - 1..]);
            let t = &taus[b * k..b * k + n - 1];
            loss += g.iter().zip(t).map(|(g, t)| g * t).sum::<f64>();
            for (d, v) in d_logits.row_mut(b).iter_mut().zip(logit_gradient(&probs[b], &g)) {
                *d = scale * v;
            }
        }
        let (grads, _) = self.layer.backward(d_logits.view())?;
        self.optimizer.step(self.layer.params_mut(), &grads)?;
        Ok(loss * scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::quadrature::staircase_w1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stub(quantile: impl Fn(f64) -> f64) -> impl FnMut(&[f64], usize) -> Result<Array2<f64>> {
        move |taus: &[f64], k: usize| {
            Ok(Array2::from_shape_vec((taus.len() / k, k), taus.iter().map(|&t| quantile(t)).collect()).unwrap())
        }
    }

    fn zeroed(n: usize, lr: f64) -> FractionProposer {
        FractionProposer::from_layer(Mlp::zeros(&[2, n], &[Activation::Identity]).unwrap(), lr).unwrap()
    }

    fn features() -> Array2<f64> {
        ndarray::array![[1.0, -0.5]]
    }

    #[test]
    fn zero_weights_give_equidistant_fractions() {
        let p = zeroed(4, 1e-3);
        let fr = p.propose(features().view()).unwrap();
        for (b, e) in fr[0].boundaries().iter().zip([0.0, 0.25, 0.5, 0.75, 1.0]) {
            assert!((b - e).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_quantile_function_leaves_logits_unchanged() {
        let mut p = zeroed(3, 1e-2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for v in p.layer_mut().params_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let before = p.layer().params().to_vec();
        let loss = p.update(features().view(), stub(|_| 3.0)).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(p.layer().params(), &before[..]);
    }

    #[test]
    fn interior_boundary_moves_toward_half_for_uniform_quantiles() {
        // boundaries {0, τ₁, 1} with identity quantile function: ∂W₁/∂τ₁ = τ₁ − ½
        for bias in [1.0, -1.0] {
            let mut p = zeroed(2, 1e-2);
            p.layer_mut().layer_mut(0).1[0] = bias;
            let f = features();
            let before = p.propose(f.view()).unwrap()[0].interior()[0];
            p.update(f.view(), stub(|t| t)).unwrap();
            let after = p.propose(f.view()).unwrap()[0].interior()[0];
            assert!((after - 0.5).abs() < (before - 0.5).abs(), "{before} -> {after}");
        }
    }

    #[test]
    fn updates_decrease_integrated_w1() {
        let q = |t: f64| (t * 3.0).exp() + 2.0 * t;
        let mut p = FractionProposer::new(2, 6, 1e-3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let f = features();
        let mut last = staircase_w1(q, p.propose(f.view()).unwrap()[0].boundaries());
        for step in 0..100 {
            p.update(f.view(), stub(q)).unwrap();
            let w = staircase_w1(q, p.propose(f.view()).unwrap()[0].boundaries());
            assert!(w < last, "step {step}: {w} >= {last}");
            last = w;
        }
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let q = |t: f64| t * t + t;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [2, 5, 9] {
            let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fr = fractions_from_logits(&logits).unwrap();
            let mids: Vec<f64> = fr.midpoints().iter().map(|&t| q(t)).collect();
            let bounds: Vec<f64> = fr.interior().iter().map(|&t| q(t)).collect();
            let g = w1_fraction_gradient_from_values(&bounds, &mids);
            let proxy = |z: &[f64]| -> f64 {
                let f = fractions_from_logits(z).unwrap();
                f.interior().iter().zip(&g).map(|(t, g)| t * g).sum()
            };
            let analytic = logit_gradient(&softmax(&logits), &g);
            let err = crate::oracle::finite_diff_check(proxy, &logits, &analytic, 1e-6);
            assert!(err < 1e-8, "n={n}: {err}");
        }
    }
}
