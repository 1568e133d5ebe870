//! Cosine embedding of quantile levels.
//!
//! Row `k` of `Phi(tau)` is `ReLU(Dense([cos(pi tau_k), ..., cos(N_cos pi tau_k)]))`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use super::dense::{relu, relu_backward, Dense};
use super::params::ParameterSet;

/// `K x N_cos` matrix of `cos(i pi tau_k)`, `i = 1..=N_cos`.
pub fn cosine_features(taus: &[f64], n_cos: usize) -> Array2<f64> {
    Array2::from_shape_fn((taus.len(), n_cos), |(k, i)| ((i + 1) as f64 * PI * taus[k]).cos())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosineEmbedding {
    pub dense: Dense,
    pub n_cos: usize,
}

#[derive(Debug, Clone)]
pub struct CosineCache {
    features: Array2<f64>,
    out: Array2<f64>,
}

impl CosineEmbedding {
    pub fn new<R: Rng + ?Sized>(params: &mut ParameterSet, name: &str, n_cos: usize, width: usize, rng: &mut R) -> Self {
        Self { dense: Dense::new(params, name, n_cos, width, rng), n_cos }
    }

    pub fn forward(&self, p: &ParameterSet, taus: &[f64]) -> (Array2<f64>, CosineCache) {
        let features = cosine_features(taus, self.n_cos);
        let out = relu(&self.dense.forward(p, &features));
        (out.clone(), CosineCache { features, out })
    }

    pub fn backward(&self, p: &ParameterSet, cache: &CosineCache, d_phi: &Array2<f64>, g: &mut ParameterSet) {
        let d_pre = relu_backward(&cache.out, d_phi);
        self.dense.backward(p, &cache.features, &d_pre, g);
    }
}

/// `Z = z (.) Phi`: every row of `phi` multiplied elementwise by `z`.
pub fn modulate(z: ArrayView1<'_, f64>, phi: &Array2<f64>) -> Array2<f64> {
    phi * &z
}

/// Gradients of [`modulate`] with respect to `z` and `phi`.
pub fn modulate_backward(z: ArrayView1<'_, f64>, phi: &Array2<f64>, d_out: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let dz = (d_out * phi).sum_axis(ndarray::Axis(0));
    (dz, d_out * &z)
}
