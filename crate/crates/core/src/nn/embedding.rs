use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::{Activation, Mlp};
use crate::error::invalid;
use crate::Result;

/// Default number of cosine basis functions.
pub const DEFAULT_N_COS: usize = 64;

/// `τ ↦ ReLU(W·[cos(π·i·τ)]_{i<n_cos} + b)`.
#[derive(Debug, Clone)]
pub struct CosineEmbedding {
    n_cos: usize,
    linear: Mlp,
}

impl CosineEmbedding {
    pub fn new<R: Rng + ?Sized>(n_cos: usize, embed_dim: usize, rng: &mut R) -> Result<Self> {
        if n_cos == 0 {
            return Err(invalid!("cosine count must be positive"));
        }
        Ok(Self {
            n_cos,
            linear: Mlp::new(&[n_cos, embed_dim], &[Activation::Relu], rng)?,
        })
    }

    pub fn from_linear(linear: Mlp) -> Result<Self> {
        if linear.sizes().len() != 2 || linear.activations() != [Activation::Relu] {
            return Err(invalid!("embedding must be a single ReLU layer"));
        }
        Ok(Self {
            n_cos: linear.input_dim(),
            linear,
        })
    }

    pub fn n_cos(&self) -> usize {
        self.n_cos
    }

    pub fn embed_dim(&self) -> usize {
        self.linear.output_dim()
    }

    pub fn linear(&self) -> &Mlp {
        &self.linear
    }

    pub fn linear_mut(&mut self) -> &mut Mlp {
        &mut self.linear
    }

    /// Raw cosine features, one row per fraction.
    pub fn cosine_features(&self, taus: &[f64]) -> Result<Array2<f64>> {
        if let Some(t) = taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(invalid!("fraction {t} outside [0, 1]"));
        }
        Ok(Array2::from_shape_fn((taus.len(), self.n_cos), |(r, i)| {
            (PI * i as f64 * taus[r]).cos()
        }))
    }

    pub fn infer(&self, taus: &[f64]) -> Result<Array2<f64>> {
        let features = self.cosine_features(taus)?;
        self.linear.infer(features.view())
    }

    /// Caching forward pass; pair with [`CosineEmbedding::backward_accumulate`].
    pub fn forward(&mut self, taus: &[f64]) -> Result<Array2<f64>> {
        let features = self.cosine_features(taus)?;
        self.linear.forward(features.view())
    }

    pub fn backward_accumulate(&mut self, output_grad: ArrayView2<f64>, grads: &mut [f64]) -> Result<()> {
        self.linear.backward_accumulate(output_grad, grads).map(|_| ())
    }
}

/// `len(taus) × embed_dim` embedding matrix.
pub fn cosine_embed(e: &CosineEmbedding, taus: &[f64]) -> Result<Array2<f64>> {
    e.infer(taus)
}

/// Element-wise product of two equal-length vectors.
pub fn hadamard_combine(features: &[f64], embedding_row: &[f64]) -> Result<Vec<f64>> {
    if features.len() != embedding_row.len() {
        return Err(invalid!(
            "Hadamard product of lengths {} and {}",
            features.len(),
            embedding_row.len()
        ));
    }
    Ok(features.iter().zip(embedding_row).map(|(a, b)| a * b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn embedding() -> CosineEmbedding {
        CosineEmbedding::new(DEFAULT_N_COS, 8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn cosine_features_at_special_fractions() {
        let e = embedding();
        let f = e.cosine_features(&[0.0, 1.0, 0.5]).unwrap();
        for i in 0..DEFAULT_N_COS {
            assert_eq!(f[[0, i]], 1.0);
            let alt = if i % 2 == 0 { 1.0 } else { -1.0 };
            assert!((f[[1, i]] - alt).abs() < 1e-12);
            let quarter = [1.0, 0.0, -1.0, 0.0][i % 4];
            assert!((f[[2, i]] - quarter).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_is_relu_of_affine_features() {
        let e = embedding();
        let out = cosine_embed(&e, &[0.3, 0.9]).unwrap();
        assert_eq!(out.dim(), (2, 8));
        assert!(out.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn out_of_range_fraction_rejected() {
        let e = embedding();
        assert!(cosine_embed(&e, &[1.1]).is_err());
        assert!(cosine_embed(&e, &[-0.01]).is_err());
    }

    #[test]
    fn hadamard_examples() {
        let f = [0.5, -2.0, 3.0];
        assert_eq!(hadamard_combine(&f, &[1.0; 3]).unwrap(), f.to_vec());
        assert_eq!(hadamard_combine(&f, &[0.0; 3]).unwrap(), vec![0.0, -0.0, 0.0]);
        assert_eq!(hadamard_combine(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![3.0, 8.0]);
        assert!(hadamard_combine(&[1.0], &[1.0, 2.0]).is_err());
    }
}
