//! Reverse-mode gradients against central finite differences.

use super::params::ParameterSet;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominators below this are clamped so that near-zero gradients are
/// compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// `f` returns the loss and its analytic gradient for a parameter set; every
/// scalar of `params` is perturbed by `+-step`.
pub fn numeric_gradient_check<F>(params: &ParameterSet, step: f64, f: F) -> GradCheckReport
where
    F: Fn(&ParameterSet) -> (f64, ParameterSet),
{
    let (_, analytic) = f(params);
    assert!(analytic.same_layout(params), "gradient layout differs from parameters");
    let mut probe = params.clone();
    let mut report = GradCheckReport { max_relative_error: 0.0, worst: None, checked: 0 };
    for id in params.ids().collect::<Vec<_>>() {
        for flat in 0..params.get(id).len() {
            let original = params.get(id).as_slice_memory_order().expect("contiguous")[flat];
            let set = |p: &mut ParameterSet, v: f64| p.get_mut(id).as_slice_memory_order_mut().expect("contiguous")[flat] = v;
            set(&mut probe, original + step);
            let plus = f(&probe).0;
            set(&mut probe, original - step);
            let minus = f(&probe).0;
            set(&mut probe, original);
            let numeric = (plus - minus) / (2.0 * step);
            let exact = analytic.get(id).as_slice_memory_order().expect("contiguous")[flat];
            let err = (numeric - exact).abs() / numeric.abs().max(exact.abs()).max(RELATIVE_FLOOR);
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((params.name(id).to_string(), flat));
            }
            report.checked += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn exact_gradient_passes_and_wrong_one_fails() {
        let mut p = ParameterSet::new();
        let id = p.add("w", arr2(&[[0.3, -1.2, 2.0]]));
        let loss = |q: &ParameterSet| q.get(id).iter().map(|w| w.powi(3)).sum::<f64>();
        let good = numeric_gradient_check(&p, DEFAULT_STEP, |q| {
            let mut g = q.zeros_like();
            *g.get_mut(id) = q.get(id).mapv(|w| 3.0 * w * w);
            (loss(q), g)
        });
        assert!(good.max_relative_error < 1e-8);
        assert_eq!(good.checked, 3);
        let bad = numeric_gradient_check(&p, DEFAULT_STEP, |q| {
            let mut g = q.zeros_like();
            *g.get_mut(id) = q.get(id).mapv(|w| 2.0 * w * w);
            (loss(q), g)
        });
        assert!(bad.max_relative_error > 0.3);
        assert_eq!(bad.worst.unwrap().0, "w");
    }
}
