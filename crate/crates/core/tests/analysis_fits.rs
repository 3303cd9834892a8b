use nalgebra::{DMatrix, DVector};
use nnmass_core::analysis::{holdout_fit, linear_fit, r_squared, XTransform};
use nnmass_core::rng;
use rand::Rng;

// Least squares through the normal equations (X^T X) b = X^T y.
fn normal_equations(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let x = DMatrix::from_fn(xs.len(), 2, |r, c| if c == 0 { 1.0 } else { xs[r] });
    let y = DVector::from_column_slice(ys);
    let xt = x.transpose();
    let b = (&xt * &x).lu().solve(&(&xt * &y)).unwrap();
    let fitted = &x * &b;
    let mean = y.mean();
    let ss_res = (&y - &fitted).norm_squared();
    let ss_tot = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (b[1], b[0], 1.0 - ss_res / ss_tot)
}

#[test]
fn five_point_fixture_matches_normal_equations() {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
    let ys = [2.0, 2.9, 4.1, 5.0, 6.2];
    for tf in [XTransform::Identity, XTransform::Log] {
        let fit = linear_fit(&xs, &ys, tf).unwrap();
        let tx: Vec<f64> = xs.iter().map(|&x| tf.apply(x).unwrap()).collect();
        let (slope, intercept, r2) = normal_equations(&tx, &ys);
        assert!((fit.slope - slope).abs() < 1e-10);
        assert!((fit.intercept - intercept).abs() < 1e-10);
        assert!((fit.r_squared - r2).abs() < 1e-10);
        let predicted: Vec<f64> = xs.iter().map(|&x| fit.predict(x).unwrap()).collect();
        assert!((r_squared(&predicted, &ys).unwrap() - r2).abs() < 1e-10);
    }
}

#[test]
fn unrelated_variables_have_low_r_squared() {
    let mut r = rng::rng_from_seed(99);
    let xs: Vec<f64> = (0..400).map(|_| r.random_range(1.0..100.0)).collect();
    let ys: Vec<f64> = (0..400).map(|_| r.random_range(0.0..1.0)).collect();
    for tf in [XTransform::Identity, XTransform::Log] {
        assert!(linear_fit(&xs, &ys, tf).unwrap().r_squared < 0.2);
    }
}

#[test]
fn out_of_sample_r_squared_can_be_negative() {
    assert!(r_squared(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0]).unwrap() < 0.0);
}

#[test]
fn held_out_points_are_scored_by_the_training_fit() {
    let xs: Vec<f64> = (1..=12).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 0.1 * x.ln() + 0.5 + if (*x as u32).is_multiple_of(2) { 0.002 } else { -0.002 }).collect();
    let split: Vec<bool> = (0..12).map(|k| k < 8).collect();
    let h = holdout_fit(&xs, &ys, &split, XTransform::Log).unwrap();
    assert_eq!(h.held_out, 4);
    assert_eq!(h.fit.n, 8);
    assert!((h.held_out_r_squared - h.fit.r_squared).abs() < 0.15);
    assert!(holdout_fit(&xs, &ys, &split[..3], XTransform::Log).is_err());
}
