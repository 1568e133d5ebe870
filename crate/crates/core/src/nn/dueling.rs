//! Dueling head: `Q(., a) = V + A(., a) - mean_a' A(., a')`.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::dense::{relu, relu_backward, Dense};
use super::params::ParameterSet;

/// Combine a value column (`B`) with advantages (`B x I_pos`).
pub fn dueling_combine(value: &Array1<f64>, advantage: &Array2<f64>) -> Array2<f64> {
    let mean = advantage.mean_axis(Axis(1)).expect("at least one action");
    let mut q = advantage.clone();
    for (mut row, (v, m)) in q.rows_mut().into_iter().zip(value.iter().zip(mean.iter())) {
        row.mapv_inplace(|a| v + a - m);
    }
    q
}

/// Gradients of [`dueling_combine`] with respect to the value and advantages.
pub fn dueling_combine_backward(d_q: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let d_value = d_q.sum_axis(Axis(1));
    let mean = d_q.mean_axis(Axis(1)).expect("at least one action");
    let mut d_adv = d_q.clone();
    for (mut row, m) in d_adv.rows_mut().into_iter().zip(mean.iter()) {
        row.mapv_inplace(|d| d - m);
    }
    (d_value, d_adv)
}

/// Two-layer value and advantage streams on a shared input.
#[derive(Debug, Clone, PartialEq)]
pub struct DuelingHead {
    pub value_hidden: Dense,
    pub value_out: Dense,
    pub adv_hidden: Dense,
    pub adv_out: Dense,
    pub actions: usize,
}

#[derive(Debug, Clone)]
pub struct DuelingCache {
    x: Array2<f64>,
    value_h: Array2<f64>,
    adv_h: Array2<f64>,
}

impl DuelingHead {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParameterSet,
        name: &str,
        inputs: usize,
        hidden: usize,
        actions: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            value_hidden: Dense::new(params, &format!("{name}.value.0"), inputs, hidden, rng),
            value_out: Dense::new(params, &format!("{name}.value.1"), hidden, 1, rng),
            adv_hidden: Dense::new(params, &format!("{name}.adv.0"), inputs, hidden, rng),
            adv_out: Dense::new(params, &format!("{name}.adv.1"), hidden, actions, rng),
            actions,
        }
    }

    /// `B x in` to `B x I_pos`.
    pub fn forward(&self, p: &ParameterSet, x: &Array2<f64>) -> (Array2<f64>, DuelingCache) {
        let value_h = relu(&self.value_hidden.forward(p, x));
        let value = self.value_out.forward(p, &value_h).column(0).to_owned();
        let adv_h = relu(&self.adv_hidden.forward(p, x));
        let adv = self.adv_out.forward(p, &adv_h);
        let q = dueling_combine(&value, &adv);
        (q, DuelingCache { x: x.clone(), value_h, adv_h })
    }

    pub fn backward(&self, p: &ParameterSet, cache: &DuelingCache, d_q: &Array2<f64>, g: &mut ParameterSet) -> Array2<f64> {
        let (d_value, d_adv) = dueling_combine_backward(d_q);
        let d_value = d_value.insert_axis(Axis(1));
        let d_vh = self.value_out.backward(p, &cache.value_h, &d_value, g);
        let mut dx = self.value_hidden.backward(p, &cache.x, &relu_backward(&cache.value_h, &d_vh), g);
        let d_ah = self.adv_out.backward(p, &cache.adv_h, &d_adv, g);
        dx += &self.adv_hidden.backward(p, &cache.x, &relu_backward(&cache.adv_h, &d_ah), g);
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    #[test]
    fn combine_examples() {
        let q = dueling_combine(&arr1(&[2.0]), &arr2(&[[1.0, 2.0, 3.0]]));
        assert_eq!(q, arr2(&[[1.0, 2.0, 3.0]]));
        let q = dueling_combine(&arr1(&[-0.7]), &arr2(&[[4.0, 4.0, 4.0, 4.0]]));
        assert!(q.iter().all(|&v| (v + 0.7).abs() < 1e-15));
        let q = dueling_combine(&arr1(&[1.3, 0.2]), &arr2(&[[0.1, -5.0, 7.7], [2.0, 3.0, 11.0]]));
        assert!((q.row(0).mean().unwrap() - 1.3).abs() < 1e-12);
        assert!((q.row(1).mean().unwrap() - 0.2).abs() < 1e-12);
    }
}
