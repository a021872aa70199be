use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use risopt::numerics::{
    checked_cmat, ensure_finite, frob_norm_sq, hermitian_eigen, hermitian_logdet, pd_solve,
    sample_cgaussian, NumericsError, RngStream,
};
use risopt::CMat;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Random Hermitian positive-definite matrix `B^H B + I`.
fn random_pd(n: usize, stream: u64) -> CMat {
    let mut rng = RngStream::new(7, stream).rng();
    let b = sample_cgaussian(&mut rng, n, n, 1.0);
    b.adjoint() * &b + CMat::identity(n, n)
}

#[test]
fn logdet_identity_is_zero() {
    let a = CMat::identity(3, 3);
    assert_abs_diff_eq!(hermitian_logdet(&a).unwrap(), 0.0, epsilon = 1e-15);
}

#[test]
fn logdet_scaled_identity() {
    let a = CMat::identity(2, 2) * c(2.0, 0.0);
    assert_abs_diff_eq!(hermitian_logdet(&a).unwrap(), 2.0 * 2.0_f64.ln(), epsilon = 1e-14);
}

#[test]
fn logdet_matches_eigenvalue_product_oracle() {
    // Independent route to ln det: sum of logs of the eigenvalues.
    for stream in 0..20 {
        let a = random_pd(4, stream);
        let (vals, _) = hermitian_eigen(&a).unwrap();
        let oracle: f64 = vals.iter().map(|l| l.ln()).sum();
        let got = hermitian_logdet(&a).unwrap();
        assert!(
            (got - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
            "stream {stream}: logdet {got} vs eigen oracle {oracle}"
        );
    }
}

#[test]
fn logdet_rejects_non_hermitian() {
    let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    assert!(matches!(hermitian_logdet(&a), Err(NumericsError::NotHermitian { .. })));
}

#[test]
fn logdet_rejects_indefinite() {
    let a = CMat::identity(3, 3) * c(-1.0, 0.0);
    assert!(matches!(hermitian_logdet(&a), Err(NumericsError::NotPositiveDefinite)));
}

#[test]
fn pd_solve_identity_returns_rhs() {
    let a = CMat::identity(3, 3);
    let mut rng = RngStream::new(1, 0).rng();
    let b = sample_cgaussian(&mut rng, 3, 2, 1.0);
    let x = pd_solve(&a, &b).unwrap();
    assert!(frob_norm_sq(&(&x - &b)).sqrt() <= 1e-15);
}

#[test]
fn pd_solve_scaled_identity_halves() {
    let a = CMat::identity(2, 2) * c(2.0, 0.0);
    let b = CMat::identity(2, 2);
    let x = pd_solve(&a, &b).unwrap();
    let expect = CMat::identity(2, 2) * c(0.5, 0.0);
    assert!(frob_norm_sq(&(&x - &expect)).sqrt() <= 1e-15);
}

#[test]
fn pd_solve_residual_small_on_random_systems() {
    for stream in 0..20 {
        let a = random_pd(6, stream);
        let mut rng = RngStream::new(11, stream).rng();
        let b = sample_cgaussian(&mut rng, 6, 3, 1.0);
        let x = pd_solve(&a, &b).unwrap();
        let resid = frob_norm_sq(&(&a * &x - &b)).sqrt() / frob_norm_sq(&b).sqrt();
        assert!(resid <= 1e-10, "stream {stream}: relative residual {resid}");
    }
}

#[test]
fn pd_solve_exact_on_diagonal_systems() {
    let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
        c(2.0, 0.0),
        c(4.0, 0.0),
        c(0.5, 0.0),
    ]));
    let mut rng = RngStream::new(2, 5).rng();
    let b = sample_cgaussian(&mut rng, 3, 2, 1.0);
    let x = pd_solve(&a, &b).unwrap();
    for i in 0..3 {
        for j in 0..2 {
            let expect = b[(i, j)] / a[(i, i)];
            assert!((x[(i, j)] - expect).norm() <= 1e-15 * expect.norm().max(1.0));
        }
    }
}

#[test]
fn pd_solve_dimension_mismatch() {
    let a = CMat::identity(3, 3);
    let b = CMat::identity(2, 2);
    assert!(matches!(pd_solve(&a, &b), Err(NumericsError::DimensionMismatch { .. })));
}

#[test]
fn eigen_reconstructs_matrix() {
    let a = random_pd(5, 3);
    let (vals, vecs) = hermitian_eigen(&a).unwrap();
    let lambda = CMat::from_diagonal(&vals.map(|v| c(v, 0.0)));
    let back = &vecs * lambda * vecs.adjoint();
    let rel = (frob_norm_sq(&(&back - &a)) / frob_norm_sq(&a)).sqrt();
    assert!(rel <= 1e-12, "reconstruction error {rel}");
    // Sorted descending.
    for i in 1..vals.len() {
        assert!(vals[i - 1] >= vals[i]);
    }
}

#[test]
fn cgaussian_moments_match_at_unit_variance() {
    let mut rng = RngStream::new(42, 0).rng();
    let m = sample_cgaussian(&mut rng, 100, 1000, 1.0);
    let n = (m.nrows() * m.ncols()) as f64;
    let mean = m.iter().sum::<Complex64>() / n;
    let power = m.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    assert!(mean.norm() <= 0.02, "empirical mean {mean}");
    assert!((0.98..=1.02).contains(&power), "empirical E|x|^2 = {power}");
}

#[test]
fn cgaussian_variance_scales() {
    let mut rng = RngStream::new(42, 1).rng();
    let m = sample_cgaussian(&mut rng, 100, 1000, 4.0);
    let n = (m.nrows() * m.ncols()) as f64;
    let power = m.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    assert!((3.9..=4.1).contains(&power), "empirical E|x|^2 = {power}");
}

#[test]
fn cgaussian_is_reproducible_per_stream() {
    let a = sample_cgaussian(&mut RngStream::new(9, 4).rng(), 8, 8, 1.0);
    let b = sample_cgaussian(&mut RngStream::new(9, 4).rng(), 8, 8, 1.0);
    assert_eq!(a, b);
    let c = sample_cgaussian(&mut RngStream::new(9, 5).rng(), 8, 8, 1.0);
    assert_ne!(a, c);
}

#[test]
fn checked_cmat_enforces_invariants() {
    assert!(matches!(checked_cmat(0, 4, vec![]), Err(NumericsError::Empty { .. })));
    assert!(matches!(
        checked_cmat(2, 2, vec![c(1.0, 0.0); 3]),
        Err(NumericsError::BadLength { .. })
    ));
    let bad = vec![c(1.0, 0.0), c(f64::NAN, 0.0), c(1.0, 0.0), c(1.0, 0.0)];
    assert!(matches!(
        checked_cmat(2, 2, bad),
        Err(NumericsError::NonFinite { row: 1, col: 0 })
    ));
    let m = checked_cmat(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
    // Column-major layout contract.
    assert_eq!(m[(1, 0)], c(2.0, 0.0));
    assert_eq!(m[(0, 1)], c(3.0, 0.0));
    assert!(ensure_finite(&m).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// ln det(A) + ln det(A^{-1}) = 0: the inverse is obtained through
    /// pd_solve(A, I), never formed analytically.
    #[test]
    fn logdet_of_inverse_cancels(n in 1usize..=16, stream in 0u64..1000) {
        let a = random_pd(n, stream);
        let inv = pd_solve(&a, &CMat::identity(n, n)).unwrap();
        let sum = hermitian_logdet(&a).unwrap() + hermitian_logdet(&inv).unwrap();
        prop_assert!(sum.abs() <= 1e-8, "n={} stream={} sum={}", n, stream, sum);
    }
}
