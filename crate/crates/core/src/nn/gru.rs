//! Gated recurrent unit.
//!
//! ```text
//! r  = sigmoid(z W_r1 + h W_r2 + b_r)
//! u  = sigmoid(z W_z1 + h W_z2 + b_z)
//! h~ = tanh(z W_h1 + (r * h) W_h2 + b_h)
//! h' = u * h + (1 - u) * h~
//! ```

use ndarray::{Array2, Axis};
use rand::Rng;

use super::dense::sigmoid;
use super::params::{ParamId, ParameterSet};

#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    pub w_r1: ParamId,
    pub w_r2: ParamId,
    pub b_r: ParamId,
    pub w_z1: ParamId,
    pub w_z2: ParamId,
    pub b_z: ParamId,
    pub w_h1: ParamId,
    pub w_h2: ParamId,
    pub b_h: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    z: Array2<f64>,
    h: Array2<f64>,
    r: Array2<f64>,
    u: Array2<f64>,
    candidate: Array2<f64>,
}

impl Gru {
    pub fn new<R: Rng + ?Sized>(params: &mut ParameterSet, name: &str, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let mut add = |suffix: &str, rows: usize, cols: usize| {
            params.add_uniform(format!("{name}.{suffix}"), (rows, cols), hidden, rng)
        };
        Self {
            w_r1: add("w_r1", inputs, hidden),
            w_r2: add("w_r2", hidden, hidden),
            b_r: add("b_r", 1, hidden),
            w_z1: add("w_z1", inputs, hidden),
            w_z2: add("w_z2", hidden, hidden),
            b_z: add("b_z", 1, hidden),
            w_h1: add("w_h1", inputs, hidden),
            w_h2: add("w_h2", hidden, hidden),
            b_h: add("b_h", 1, hidden),
            inputs,
            hidden,
        }
    }

    /// One step on a batch: `z` is `B x in`, `h` is `B x hidden`.
    pub fn forward(&self, p: &ParameterSet, z: &Array2<f64>, h: &Array2<f64>) -> (Array2<f64>, GruCache) {
        let r = (z.dot(p.get(self.w_r1)) + h.dot(p.get(self.w_r2)) + p.get(self.b_r)).mapv(sigmoid);
        let u = (z.dot(p.get(self.w_z1)) + h.dot(p.get(self.w_z2)) + p.get(self.b_z)).mapv(sigmoid);
        let candidate = (z.dot(p.get(self.w_h1)) + (&r * h).dot(p.get(self.w_h2)) + p.get(self.b_h)).mapv(f64::tanh);
        let next = &u * h + &(1.0 - &u) * &candidate;
        (next, GruCache { z: z.clone(), h: h.clone(), r, u, candidate })
    }

    /// Accumulates into `g`; returns `(dL/dz, dL/dh_prev)`.
    pub fn backward(&self, p: &ParameterSet, c: &GruCache, d_next: &Array2<f64>, g: &mut ParameterSet) -> (Array2<f64>, Array2<f64>) {
        let mut dh = d_next * &c.u;
        let du = d_next * &(&c.h - &c.candidate);
        let d_cand = d_next * &(1.0 - &c.u);
        let d_cand_pre = d_cand * &c.candidate.mapv(|t| 1.0 - t * t);
        let du_pre = du * &c.u.mapv(|s| s * (1.0 - s));

        let rh = &c.r * &c.h;
        let d_rh = d_cand_pre.dot(&p.get(self.w_h2).t());
        let dr_pre = (&d_rh * &c.h) * &c.r.mapv(|s| s * (1.0 - s));
        dh += &(&d_rh * &c.r);

        let mut dz = Array2::zeros(c.z.dim());
        for (w1, w2, b, d_pre, h_in) in [
            (self.w_r1, self.w_r2, self.b_r, &dr_pre, &c.h),
            (self.w_z1, self.w_z2, self.b_z, &du_pre, &c.h),
            (self.w_h1, self.w_h2, self.b_h, &d_cand_pre, &rh),
        ] {
            *g.get_mut(w1) += &c.z.t().dot(d_pre);
            *g.get_mut(w2) += &h_in.t().dot(d_pre);
            *g.get_mut(b) += &d_pre.sum_axis(Axis(0)).insert_axis(Axis(0));
            dz += &d_pre.dot(&p.get(w1).t());
        }
        dh += &dr_pre.dot(&p.get(self.w_r2).t());
        dh += &du_pre.dot(&p.get(self.w_z2).t());
        (dz, dh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn zero_gru(inputs: usize, hidden: usize) -> (Gru, ParameterSet) {
        let mut p = ParameterSet::new();
        let mut rng = crate::seed::SeedStream::new(0).rng(0, 0, crate::seed::Purpose::Init);
        let gru = Gru::new(&mut p, "gru", inputs, hidden, &mut rng);
        p.scale(0.0);
        (gru, p)
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let (gru, p) = zero_gru(1, 1);
        let (h, _) = gru.forward(&p, &arr2(&[[0.3]]), &arr2(&[[1.0]]));
        assert!((h[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn saturated_update_gate_copies_state() {
        let (gru, mut p) = zero_gru(2, 3);
        p.get_mut(gru.b_z).fill(50.0);
        p.get_mut(gru.w_h1).fill(1.0);
        let h0 = arr2(&[[0.2, -0.4, 0.9]]);
        let (h, _) = gru.forward(&p, &arr2(&[[1.0, 2.0]]), &h0);
        assert!((&h - &h0).iter().all(|d| d.abs() < 1e-12));
    }
}
