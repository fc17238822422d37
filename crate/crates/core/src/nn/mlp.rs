use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            // `max` would swallow NaN and hide a diverged network
            Activation::Relu => {
                if x < 0.0 {
                    0.0
                } else {
                    x
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl LayerShape {
    fn weight_len(&self) -> usize {
        self.inputs * self.outputs
    }

    fn len(&self) -> usize {
        self.weight_len() + self.outputs
    }
}

#[derive(Debug, Clone)]
struct Cache {
    /// Input of each layer followed by the network output.
    activations: Vec<Array2<f64>>,
}

/// Fully connected network over row-major batches.
///
/// All parameters live in one flat vector (per layer: the `outputs × inputs`
/// weight matrix, then the bias), so optimizers, target updates and
/// checkpoints all work on plain slices.
#[derive(Debug, Clone)]
pub struct Mlp {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
    cache: Option<Cache>,
}

impl Mlp {
    /// Network with `sizes[0]` inputs and one layer per remaining size,
    /// initialized uniformly in `±1/√fan_in`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, activations)?;
        for layer in net.layers.clone() {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for p in &mut net.params[layer.offset..layer.offset + layer.len()] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(invalid!("an MLP needs an input size and at least one layer"));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(invalid!(
                "{} activations for {} layers",
                activations.len(),
                sizes.len() - 1
            ));
        }
        if sizes.contains(&0) {
            return Err(invalid!("layer sizes must be positive: {sizes:?}"));
        }
        let mut offset = 0;
        let layers: Vec<LayerShape> = sizes
            .windows(2)
            .map(|w| {
                let l = LayerShape {
                    inputs: w[0],
                    outputs: w[1],
                    offset,
                };
                offset += l.len();
                l
            })
            .collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            activations: activations.to_vec(),
            layers,
            params: vec![0.0; offset],
            cache: None,
        })
    }

    pub fn from_params(sizes: &[usize], activations: &[Activation], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes, activations)?;
        net.set_params(&params)?;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access. Drops any cached forward pass.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.cache = None;
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(invalid!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(invalid!("parameters must be finite"));
        }
        self.params.copy_from_slice(params);
        self.cache = None;
        Ok(())
    }

    /// Weight matrix (`outputs × inputs`) and bias of layer `index`.
    pub fn layer(&self, index: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let l = self.layers[index];
        let (w, b) = self.params[l.offset..l.offset + l.len()].split_at(l.weight_len());
        (
            ArrayView2::from_shape((l.outputs, l.inputs), w).unwrap(),
            ArrayView1::from(b),
        )
    }

    pub fn layer_mut(&mut self, index: usize) -> (ArrayViewMut2<'_, f64>, ArrayViewMut1<'_, f64>) {
        self.cache = None;
        let l = self.layers[index];
        let (w, b) = self.params[l.offset..l.offset + l.len()].split_at_mut(l.weight_len());
        (
            ArrayViewMut2::from_shape((l.outputs, l.inputs), w).unwrap(),
            ArrayViewMut1::from(b),
        )
    }

    fn check_input(&self, input: &ArrayView2<f64>) -> Result<()> {
        if input.ncols() != self.input_dim() {
            return Err(invalid!(
                "input width {} does not match network input {}",
                input.ncols(),
                self.input_dim()
            ));
        }
        Ok(())
    }

    fn layer_forward(&self, index: usize, x: &ArrayView2<f64>) -> Array2<f64> {
        let (w, b) = self.layer(index);
        let mut z = x.dot(&w.t());
        z += &b;
        let act = self.activations[index];
        if act != Activation::Identity {
            z.mapv_inplace(|v| act.apply(v));
        }
        z
    }

    /// Forward pass without caching.
    pub fn infer(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&input)?;
        let mut x = self.layer_forward(0, &input);
        for i in 1..self.layers.len() {
            x = self.layer_forward(i, &x.view());
        }
        Ok(x)
    }

    /// Forward pass that keeps the intermediate activations for [`Mlp::backward`].
    pub fn forward(&mut self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for i in 0..self.layers.len() {
            let next = self.layer_forward(i, &activations[i].view());
            activations.push(next);
        }
        let out = activations.last().unwrap().clone();
        self.cache = Some(Cache { activations });
        Ok(out)
    }

    /// Single-vector convenience wrapper around [`Mlp::forward`].
    pub fn forward_vec(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).unwrap();
        Ok(self.forward(x)?.into_raw_vec_and_offset().0)
    }

    fn backprop(
        &mut self,
        output_grad: ArrayView2<f64>,
        mut param_grads: Option<&mut [f64]>,
    ) -> Result<Array2<f64>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        let acts = &cache.activations;
        let out = acts.last().unwrap();
        if output_grad.dim() != out.dim() {
            return Err(invalid!(
                "output gradient shape {:?} does not match output {:?}",
                output_grad.dim(),
                out.dim()
            ));
        }
        if let Some(g) = param_grads.as_deref() {
            if g.len() != self.params.len() {
                return Err(invalid!("gradient buffer has {} entries, expected {}", g.len(), self.params.len()));
            }
        }
        let mut grad = output_grad.to_owned();
        for i in (0..self.layers.len()).rev() {
            let act = self.activations[i];
            if act != Activation::Identity {
                grad.zip_mut_with(&acts[i + 1], |g, &y| *g *= act.derivative_from_output(y));
            }
            let l = self.layers[i];
            if let Some(buf) = param_grads.as_deref_mut() {
                let (gw, gb) = buf[l.offset..l.offset + l.len()].split_at_mut(l.weight_len());
                let mut gw = ArrayViewMut2::from_shape((l.outputs, l.inputs), gw).unwrap();
                general_mat_mul(1.0, &grad.t(), &acts[i], 1.0, &mut gw);
                let mut gb = ArrayViewMut1::from(gb);
                gb += &grad.sum_axis(Axis(0));
            }
            let (w, _) = self.layer(i);
            grad = grad.dot(&w);
        }
        Ok(grad)
    }

    /// Reverse-mode pass through the cached forward. Returns parameter
    /// gradients (same layout as [`Mlp::params`]) and the input gradient.
    pub fn backward(&mut self, output_grad: ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        let mut grads = vec![0.0; self.params.len()];
        let input_grad = self.backprop(output_grad, Some(&mut grads))?;
        Ok((grads, input_grad))
    }

    /// Like [`Mlp::backward`] but adds parameter gradients into `grads`.
    pub fn backward_accumulate(&mut self, output_grad: ArrayView2<f64>, grads: &mut [f64]) -> Result<Array2<f64>> {
        self.backprop(output_grad, Some(grads))
    }

    /// Input gradient only; parameter gradients are not formed.
    pub fn backward_input(&mut self, output_grad: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.backprop(output_grad, None)
    }

    /// `self ← (1 − tau)·self + tau·source`.
    pub fn polyak_from(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        if source.params.len() != self.params.len() {
            return Err(invalid!("polyak update between networks of different shape"));
        }
        self.cache = None;
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t = *t * (1.0 - tau) + *s * tau;
        }
        Ok(())
    }
}
