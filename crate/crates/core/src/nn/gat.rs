//! Single-head graph attention.
//!
//! With `P = X W`, the score of edge `(i, j)` is
//! `LeakyReLU(beta_1 . P_i + beta_2 . P_j)`, normalized by a softmax over the
//! neighbours of `i`, and the new feature of `i` is
//! `ReLU(sum_j alpha_ij P_j)`.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::dense::{leaky_relu, relu, relu_backward, LEAKY_SLOPE};
use super::params::{ParamId, ParameterSet};

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    /// `in x out`.
    pub w: ParamId,
    /// `2 x out`: row 0 scores the receiving vertex, row 1 the neighbour.
    pub beta: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone)]
pub struct GatCache {
    x: Array2<f64>,
    projected: Array2<f64>,
    scores: Array2<f64>,
    pub attention: Array2<f64>,
    out: Array2<f64>,
}

impl GatLayer {
    pub fn new<R: Rng + ?Sized>(params: &mut ParameterSet, name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let w = params.add_uniform(format!("{name}.w"), (inputs, outputs), inputs, rng);
        let beta = params.add_uniform(format!("{name}.beta"), (2, outputs), outputs, rng);
        Self { w, beta, inputs, outputs }
    }

    /// `adjacency` must contain self-loops.
    pub fn forward(&self, p: &ParameterSet, x: &Array2<f64>, adjacency: &Array2<bool>) -> (Array2<f64>, GatCache) {
        let v = x.nrows();
        let projected = x.dot(p.get(self.w));
        let beta = p.get(self.beta);
        let src: Array1<f64> = projected.dot(&beta.row(0));
        let dst: Array1<f64> = projected.dot(&beta.row(1));
        let scores = Array2::from_shape_fn((v, v), |(i, j)| src[i] + dst[j]);
        let mut attention = Array2::zeros((v, v));
        for i in 0..v {
            let mut top = f64::NEG_INFINITY;
            for j in 0..v {
                if adjacency[(i, j)] {
                    top = top.max(leaky_relu(scores[(i, j)]));
                }
            }
            let mut total = 0.0;
            for j in 0..v {
                if adjacency[(i, j)] {
                    let e = (leaky_relu(scores[(i, j)]) - top).exp();
                    attention[(i, j)] = e;
                    total += e;
                }
            }
            attention.row_mut(i).mapv_inplace(|a| a / total);
        }
        let out = relu(&attention.dot(&projected));
        let cache = GatCache { x: x.clone(), projected, scores, attention, out: out.clone() };
        (out, cache)
    }

    /// Accumulates into `g`; returns `dL/dX`.
    pub fn backward(&self, p: &ParameterSet, cache: &GatCache, d_out: &Array2<f64>, g: &mut ParameterSet) -> Array2<f64> {
        let beta = p.get(self.beta);
        let alpha = &cache.attention;
        let dh = relu_backward(&cache.out, d_out);
        let mut d_proj = alpha.t().dot(&dh);
        // dL/dalpha_ij = dh_i . P_j, then back through the row softmax.
        let d_alpha = dh.dot(&cache.projected.t());
        let row_dot = (alpha * &d_alpha).sum_axis(Axis(1));
        let v = alpha.nrows();
        let mut d_scores = Array2::zeros((v, v));
        for i in 0..v {
            for j in 0..v {
                let a = alpha[(i, j)];
                if a != 0.0 {
                    let slope = if cache.scores[(i, j)] > 0.0 { 1.0 } else { LEAKY_SLOPE };
                    d_scores[(i, j)] = a * (d_alpha[(i, j)] - row_dot[i]) * slope;
                }
            }
        }
        let d_src = d_scores.sum_axis(Axis(1));
        let d_dst = d_scores.sum_axis(Axis(0));
        let mut d_beta = Array2::zeros((2, self.outputs));
        d_beta.row_mut(0).assign(&cache.projected.t().dot(&d_src));
        d_beta.row_mut(1).assign(&cache.projected.t().dot(&d_dst));
        *g.get_mut(self.beta) += &d_beta;
        for i in 0..v {
            d_proj.row_mut(i).scaled_add(d_src[i], &beta.row(0));
            d_proj.row_mut(i).scaled_add(d_dst[i], &beta.row(1));
        }
        *g.get_mut(self.w) += &cache.x.t().dot(&d_proj);
        d_proj.dot(&p.get(self.w).t())
    }
}

/// Graph embedding: sum of vertex embeddings (zero for an empty graph).
pub fn graph_pool(x: &Array2<f64>) -> Array1<f64> {
    x.sum_axis(Axis(0))
}

/// Every vertex receives the pooled gradient.
pub fn graph_pool_backward(vertices: usize, d_pooled: &Array1<f64>) -> Array2<f64> {
    d_pooled.broadcast((vertices, d_pooled.len())).expect("broadcast").to_owned()
}
