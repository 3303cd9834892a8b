use nalgebra::DMatrix;
use nnmass_core::randmat::{
    mean_square_identity_check, rows_for_mass, sample_gaussian, simulate_mass_sweep, singular_values, Matrix,
};
use proptest::prelude::*;

// Singular values as square roots of the Gram matrix eigenvalues.
fn gram_oracle(m: &Matrix) -> Vec<f64> {
    let a = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let gram = if m.rows() >= m.cols() { a.transpose() * &a } else { &a * a.transpose() };
    let mut v: Vec<f64> = gram
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&e| e.max(0.0).sqrt())
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobi_matches_gram_eigenvalues(rows in 1usize..24, cols in 1usize..24, seed in any::<u64>()) {
        let m = sample_gaussian(rows, cols, 1.0, seed).unwrap();
        let ours = singular_values(&m).unwrap();
        let oracle = gram_oracle(&m);
        prop_assert_eq!(ours.values.len(), rows.min(cols));
        let top = oracle[0];
        for (a, b) in ours.values.iter().zip(&oracle) {
            // Squaring in the Gram route loses accuracy on the small values.
            prop_assert!((a - b).abs() <= 1e-6 * top.max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn frobenius_and_scale(rows in 1usize..20, cols in 1usize..20, k in -5.0f64..5.0, seed in any::<u64>()) {
        let m = sample_gaussian(rows, cols, 2.0, seed).unwrap();
        let s = singular_values(&m).unwrap();
        let sum_sq: f64 = s.values.iter().map(|v| v * v).sum();
        prop_assert!((sum_sq - m.frobenius_sq()).abs() <= 1e-10 * m.frobenius_sq().max(1.0));
        let scaled = singular_values(&m.scaled(k)).unwrap();
        for (a, b) in scaled.values.iter().zip(&s.values) {
            prop_assert!((a - k.abs() * b).abs() <= 1e-10 * (k.abs() * b).max(1.0));
        }
        let t = singular_values(&m.transpose()).unwrap();
        for (a, b) in t.values.iter().zip(&s.values) {
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0));
        }
    }
}

#[test]
fn identity_and_diagonal() {
    let s = singular_values(&Matrix::identity(7)).unwrap();
    assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    let d = Matrix::new(3, 3, vec![3.0, 0.0, 0.0, 0.0, -5.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
    let v = singular_values(&d).unwrap().values;
    assert_eq!(v.len(), 3);
    for (a, b) in v.iter().zip([5.0, 3.0, 0.5]) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn rank_deficient_matrix_has_zero_singular_value() {
    let m = Matrix::new(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
    let v = singular_values(&m).unwrap().values;
    assert!((v[0] - (70.0f64).sqrt()).abs() < 1e-12);
    assert!(v[1].abs() < 1e-12);
}

#[test]
fn mean_square_is_row_count() {
    for (h, w) in [(40, 5), (30, 30)] {
        let e = mean_square_identity_check(h, w, 200, 17).unwrap();
        assert!((e.mean - h as f64).abs() <= 5.0 * e.std_error, "{e:?}");
    }
}

#[test]
fn mean_sv_grows_with_mass() {
    assert_eq!(rows_for_mass(8, 30.0), 23);
    let masses: Vec<f64> = (0..6).map(|k| f64::from(k) * 40.0).collect();
    let rows = simulate_mass_sweep(8, &masses, 20, 1.0, 5).unwrap();
    assert!(rows.windows(2).all(|p| p[1].mean_sv > p[0].mean_sv));
    assert_eq!(rows, simulate_mass_sweep(8, &masses, 20, 1.0, 5).unwrap());
}
