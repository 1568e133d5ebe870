use ndarray::{Array2, Axis};
use rand::Rng;

use super::params::{ParamId, ParameterSet};

/// Affine map `y = x W + b` on row-major batches (`B x in` to `B x out`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(params: &mut ParameterSet, name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let w = params.add_uniform(format!("{name}.w"), (inputs, outputs), inputs, rng);
        let b = params.add_uniform(format!("{name}.b"), (1, outputs), inputs, rng);
        Self { w, b, inputs, outputs }
    }

    pub fn forward(&self, p: &ParameterSet, x: &Array2<f64>) -> Array2<f64> {
        x.dot(p.get(self.w)) + p.get(self.b)
    }

    /// Accumulates weight gradients into `g` and returns `dL/dx`.
    pub fn backward(&self, p: &ParameterSet, x: &Array2<f64>, dy: &Array2<f64>, g: &mut ParameterSet) -> Array2<f64> {
        *g.get_mut(self.w) += &x.t().dot(dy);
        *g.get_mut(self.b) += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&p.get(self.w).t())
    }
}

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient through a ReLU given its output `y`.
pub fn relu_backward(y: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut out = dy.clone();
    out.zip_mut_with(y, |d, &y| {
        if y <= 0.0 {
            *d = 0.0
        }
    });
    out
}

pub const LEAKY_SLOPE: f64 = 0.01;

pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
