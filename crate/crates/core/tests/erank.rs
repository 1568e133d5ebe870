use flexrank::linalg::{effective_rank, singular_values, ChannelMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Singular values from the eigenvalues of the real embedding
/// `[[A, -B], [B, A]]` of `H^H H = A + jB`; each eigenvalue appears twice.
fn oracle_singular_values(h: &DMatrix<Complex64>) -> Vec<f64> {
    let g = h.adjoint() * h;
    let n = g.nrows();
    let mut e = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            e[i][j] = g[(i, j)].re;
            e[i + n][j + n] = g[(i, j)].re;
            e[i][j + n] = -g[(i, j)].im;
            e[i + n][j] = g[(i, j)].im;
        }
    }
    let mut ev = jacobi_eigenvalues(e);
    ev.sort_by(|a, b| b.total_cmp(a));
    let k = h.nrows().min(h.ncols());
    ev.iter().step_by(2).take(k).map(|&l| l.max(0.0).sqrt()).collect()
}

fn complex_matrix(max_dim: usize) -> impl Strategy<Value = ChannelMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(m, n)| {
        prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), m * n).prop_map(move |v| {
            ChannelMatrix(DMatrix::from_iterator(m, n, v.into_iter().map(|(re, im)| Complex64::new(re, im))))
        })
    })
    .prop_filter("nonzero", |h| h.max_abs() > 1e-3)
}

/// Unitary factor of the QR decomposition of a complex Gaussian-like matrix.
fn unitary(n: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n).prop_map(move |v| {
        let a = DMatrix::from_iterator(n, n, v.into_iter().map(|(re, im)| Complex64::new(re, im)));
        a.qr().q()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn scale_invariance(h in complex_matrix(8), c in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64]) {
        let scaled = ChannelMatrix(h.0.map(|z| z * c));
        prop_assert!((effective_rank(&scaled).unwrap() - effective_rank(&h).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn complex_scale_invariance(h in complex_matrix(6), re in 0.1..5.0f64, im in -5.0..5.0f64) {
        let scaled = ChannelMatrix(h.0.map(|z| z * Complex64::new(re, im)));
        prop_assert!((effective_rank(&scaled).unwrap() - effective_rank(&h).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn bounds(h in complex_matrix(8)) {
        let e = effective_rank(&h).unwrap();
        let cap = h.rows().min(h.cols()) as f64;
        prop_assert!(e >= 1.0 - 1e-12 && e <= cap + 1e-9, "erank {e} cap {cap}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unitary_invariance((h, u, v) in (1usize..6, 1usize..6).prop_flat_map(|(m, n)| {
        let h = prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), m * n)
            .prop_map(move |v| DMatrix::from_iterator(m, n, v.into_iter().map(|(re, im)| Complex64::new(re, im))));
        (h, unitary(m), unitary(n))
    }).prop_filter("nonzero", |(h, _, _)| h.iter().any(|z| z.norm() > 1e-3))) {
        let rotated = ChannelMatrix(&u * &h * &v);
        let plain = ChannelMatrix(h);
        prop_assert!((effective_rank(&rotated).unwrap() - effective_rank(&plain).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn permutation_invariance(h in complex_matrix(7), row_seed in any::<u64>(), col_seed in any::<u64>()) {
        let perm = |n: usize, seed: u64| {
            let mut p: Vec<usize> = (0..n).collect();
            p.sort_by_key(|&i| (i as u64 + 1).wrapping_mul(seed | 1).rotate_left(17));
            p
        };
        let rows = perm(h.rows(), row_seed);
        let cols = perm(h.cols(), col_seed);
        let shuffled = ChannelMatrix(DMatrix::from_fn(h.rows(), h.cols(), |r, c| h.0[(rows[r], cols[c])]));
        prop_assert!((effective_rank(&shuffled).unwrap() - effective_rank(&h).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn spectrum_matches_jacobi_oracle(h in complex_matrix(6)) {
        let got = singular_values(&h).unwrap();
        let want = oracle_singular_values(&h.0);
        prop_assert_eq!(got.values().len(), want.len());
        let top = want[0];
        for (g, w) in got.values().iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-7 * top.max(1.0), "{:?} vs {:?}", got.values(), want);
        }
    }

    #[test]
    fn upper_bound_only_for_flat_spectra(n in 1usize..7, diag in prop::collection::vec(0.1..10.0f64, 6)) {
        let d: Vec<f64> = diag.into_iter().take(n).collect();
        let h = ChannelMatrix(DMatrix::from_fn(n, n, |r, c| if r == c { Complex64::new(d[r], 0.0) } else { Complex64::new(0.0, 0.0) }));
        let e = effective_rank(&h).unwrap();
        let flat = d.iter().all(|&x| (x - d[0]).abs() < 1e-12);
        prop_assert_eq!((e - n as f64).abs() < 1e-9, flat);
    }
}

#[test]
fn identity_is_exact() {
    for n in 1..=16 {
        let h = ChannelMatrix(DMatrix::identity(n, n));
        assert_eq!(effective_rank(&h).unwrap(), n as f64, "n = {n}");
    }
}

#[test]
fn diag_2_1_1() {
    let h = ChannelMatrix::from_real(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert!((effective_rank(&h).unwrap() - 2f64.powf(1.5)).abs() < 1e-12);
}
