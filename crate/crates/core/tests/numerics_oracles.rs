use coopnet_core::numerics::{
    capacity_logdet, regularized_gamma_cdf, sample_complex_gaussian, weighted_capacity_logdet,
    ComplexMatrix, SeedStream,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

/// Composite Simpson rule on the Gamma(k, 1) density over `[0, x]`.
fn gamma_cdf_quadrature(x: f64, k: u32) -> f64 {
    let ln_norm: f64 = (1..k).map(|i| (i as f64).ln()).sum();
    let density = |t: f64| {
        if t == 0.0 {
            return if k == 1 { 1.0 } else { 0.0 };
        }
        ((k - 1) as f64 * t.ln() - t - ln_norm).exp()
    };
    let panels = ((x / 2e-4).ceil() as usize).max(1000) & !1;
    let h = x / panels as f64;
    let mut sum = density(0.0) + density(x);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * density(i as f64 * h);
    }
    sum * h / 3.0
}

const X_GRID: [f64; 12] = [
    0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 35.0, 50.0,
];

#[test]
fn gamma_cdf_matches_quadrature() {
    for k in 1..=8 {
        for &x in &X_GRID {
            let got = regularized_gamma_cdf(x, k).unwrap();
            let want = gamma_cdf_quadrature(x, k);
            assert!((got - want).abs() <= 1e-10, "x={x} k={k}: {got} vs {want}");
        }
    }
}

#[test]
fn gamma_cdf_known_value() {
    let want = 1.0 - 2.0 * (-1.0f64).exp();
    assert!((regularized_gamma_cdf(1.0, 2).unwrap() - want).abs() < 1e-15);
    assert!((want - 0.2642411177).abs() < 1e-10);
}

#[test]
fn gamma_cdf_monotone_in_x_and_k() {
    for k in 1..=8 {
        let mut prev = 0.0;
        for i in 1..=500 {
            let x = i as f64 * 0.1;
            let v = regularized_gamma_cdf(x, k).unwrap();
            assert!(v >= prev, "x={x} k={k}");
            assert!((0.0..=1.0).contains(&v));
            if k > 1 {
                assert!(v <= regularized_gamma_cdf(x, k - 1).unwrap(), "x={x} k={k}");
            }
            prev = v;
        }
    }
}

#[test]
fn gamma_cdf_rejects_bad_input() {
    assert!(regularized_gamma_cdf(-1.0, 2).is_err());
    assert!(regularized_gamma_cdf(f64::NAN, 2).is_err());
    assert!(regularized_gamma_cdf(1.0, 0).is_err());
}

fn to_nalgebra(h: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(h.rows(), h.cols(), |i, j| h.get(i, j))
}

fn eigen_logdet(h: &ComplexMatrix, rho: f64) -> f64 {
    let m = to_nalgebra(h);
    let gram = &m * m.adjoint();
    gram.symmetric_eigenvalues()
        .iter()
        .map(|&l| (1.0 + rho * l.max(0.0)).log2())
        .sum()
}

fn random_matrix(stream: &SeedStream, rows: usize, cols: usize) -> ComplexMatrix {
    let mut s = stream.sampler();
    let data = (0..rows * cols).map(|_| s.complex_gaussian(1.0)).collect();
    ComplexMatrix::new(rows, cols, data).unwrap()
}

#[test]
fn logdet_matches_eigenvalue_oracle() {
    for i in 0..500u64 {
        let rows = 1 + (i % 4) as usize;
        let cols = 1 + (i / 4 % 5) as usize;
        let h = random_matrix(&SeedStream::new(11, i), rows, cols);
        for rho in [0.1, 1.0, 31.6, 1000.0] {
            let got = capacity_logdet(&h, rho).unwrap();
            let want = eigen_logdet(&h, rho);
            assert!(
                (got - want).abs() <= 1e-9,
                "{rows}x{cols} rho={rho}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn weighted_logdet_equals_scaled_columns() {
    let h = random_matrix(&SeedStream::new(5, 0), 3, 4);
    let gains: [f64; 3] = [2.0, 0.5, 7.0];
    let cols = [0, 2, 3];
    let mut scaled = h.select_columns(&cols).unwrap();
    for (j, g) in gains.iter().enumerate() {
        for i in 0..3 {
            scaled.set(i, j, scaled.get(i, j) * g.sqrt());
        }
    }
    let got = weighted_capacity_logdet(&h, &cols, &gains).unwrap();
    assert!((got - eigen_logdet(&scaled, 1.0)).abs() < 1e-9);
}

#[test]
fn complex_gaussian_second_moment() {
    let n = 1_000_000u64;
    let mean: f64 = (0..n)
        .map(|i| sample_complex_gaussian(&SeedStream::new(3, i), 1.0).norm_sqr())
        .sum::<f64>()
        / n as f64;
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn logdet_invariant_under_column_permutation(seed in any::<u64>(), rows in 1usize..4, cols in 1usize..6, rho in 0.01f64..1e3) {
        let h = random_matrix(&SeedStream::new(seed, 0), rows, cols);
        let mut perm: Vec<usize> = (0..cols).rev().collect();
        perm.rotate_left(seed as usize % cols);
        let permuted = h.select_columns(&perm).unwrap();
        let a = capacity_logdet(&h, rho).unwrap();
        let b = capacity_logdet(&permuted, rho).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn logdet_nondecreasing_in_snr(seed in any::<u64>(), rows in 1usize..4, cols in 1usize..6, rho in 0.01f64..1e3, factor in 1.0f64..10.0) {
        let h = random_matrix(&SeedStream::new(seed, 1), rows, cols);
        let a = capacity_logdet(&h, rho).unwrap();
        let b = capacity_logdet(&h, rho * factor).unwrap();
        prop_assert!(b >= a - 1e-12);
        prop_assert!(a >= 0.0);
    }
}
