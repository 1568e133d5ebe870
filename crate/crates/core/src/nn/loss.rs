//! Quantile regression with a Huber penalty.

use ndarray::Array2;

pub fn huber(u: f64, kappa: f64) -> f64 {
    if u.abs() <= kappa {
        0.5 * u * u
    } else {
        kappa * (u.abs() - 0.5 * kappa)
    }
}

/// `rho_tau^kappa(u) = |tau - 1{u < 0}| H_kappa(u) / kappa`.
pub fn quantile_huber(u: f64, tau: f64, kappa: f64) -> f64 {
    (tau - if u < 0.0 { 1.0 } else { 0.0 }).abs() * huber(u, kappa) / kappa
}

/// `d rho / du`.
pub fn quantile_huber_grad(u: f64, tau: f64, kappa: f64) -> f64 {
    let weight = (tau - if u < 0.0 { 1.0 } else { 0.0 }).abs();
    let dh = if u.abs() <= kappa { u } else { kappa * u.signum() };
    weight * dh / kappa
}

/// `(1/K') sum_k sum_k' rho_{tau_k}(delta[k, k'])` for a `K x K'` matrix of
/// TD errors; `taus` are the `K` levels of the online quantiles.
pub fn quantile_huber_loss(delta: &Array2<f64>, taus: &[f64], kappa: f64) -> f64 {
    assert_eq!(delta.nrows(), taus.len());
    let k_prime = delta.ncols() as f64;
    delta
        .rows()
        .into_iter()
        .zip(taus)
        .map(|(row, &t)| row.iter().map(|&u| quantile_huber(u, t, kappa)).sum::<f64>())
        .sum::<f64>()
        / k_prime
}

/// `dL/d delta` of [`quantile_huber_loss`].
pub fn quantile_huber_loss_grad(delta: &Array2<f64>, taus: &[f64], kappa: f64) -> Array2<f64> {
    let k_prime = delta.ncols() as f64;
    Array2::from_shape_fn(delta.dim(), |(k, j)| quantile_huber_grad(delta[(k, j)], taus[k], kappa) / k_prime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn branches() {
        assert!((quantile_huber(0.5, 0.5, 1.0) - 0.0625).abs() < 1e-15);
        assert!((quantile_huber(-2.0, 0.25, 1.0) - 1.125).abs() < 1e-15);
        for tau in [0.01, 0.5, 0.99] {
            for kappa in [0.1, 1.0, 3.0] {
                assert_eq!(quantile_huber(0.0, tau, kappa), 0.0);
            }
        }
    }

    #[test]
    fn loss_averages_over_target_samples() {
        let delta = arr2(&[[0.5, -2.0], [0.0, 0.5]]);
        let taus = [0.25, 0.5];
        let expected = (0.25 * 0.125 + 0.75 * 1.5 + 0.0 + 0.5 * 0.125) / 2.0;
        assert!((quantile_huber_loss(&delta, &taus, 1.0) - expected).abs() < 1e-15);
    }
}
