mod common;

use evaluator_outliers::mvn::MaxAbsDistribution;
use evaluator_outliers::{max_abs_quantile, sample_mvn, MaxAbsQuantileRequest};
use nalgebra::DMatrix;

#[test]
fn sample_correlation_matches_target() {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let draws = sample_mvn(&cov, 1_000_000, 8).unwrap();
    let n = draws.nrows() as f64;
    let (a, b) = (draws.column(0), draws.column(1));
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let sab = a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>();
    let saa = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>();
    let sbb = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>();
    let r = sab / (saa * sbb).sqrt();
    assert!((r - 0.5).abs() < 0.005, "{r}");
    assert!((saa / n - 1.0).abs() < 0.005);
}

#[test]
fn quantile_grows_with_dimension_and_shrinks_with_alpha() {
    let q = |d: usize, alpha: f64| {
        max_abs_quantile(&MaxAbsQuantileRequest {
            covariance: DMatrix::identity(d, d),
            alpha,
            mc_samples: 50_000,
            seed: 3,
        })
        .unwrap()
    };
    assert!(q(1, 0.05) < q(5, 0.05));
    assert!(q(5, 0.05) < q(20, 0.05));
    assert!(q(5, 0.3) < q(5, 0.1));
    assert!(q(5, 0.1) < q(5, 0.05));
}

#[test]
fn quantile_ignores_coordinate_order() {
    let mut r = common::rng(12);
    let cov = common::random_spd(&mut r, 6);
    let perm = [3, 0, 5, 1, 4, 2];
    let permuted = DMatrix::from_fn(6, 6, |i, j| cov[(perm[i], perm[j])]);
    let a = MaxAbsDistribution::sample(&cov, 200_000, 1).unwrap().quantile(0.05);
    let b = MaxAbsDistribution::sample(&permuted, 200_000, 2).unwrap().quantile(0.05);
    assert!((a - b).abs() < 0.02, "{a} {b}");
}

#[test]
fn same_seed_same_quantile() {
    let cov = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.3 });
    let a = MaxAbsDistribution::sample(&cov, 5000, 77).unwrap();
    let b = MaxAbsDistribution::sample(&cov, 5000, 77).unwrap();
    assert_eq!(a.quantile(0.1), b.quantile(0.1));
}

#[test]
fn too_few_draws_and_bad_alpha_are_rejected() {
    let cov = DMatrix::identity(2, 2);
    assert!(MaxAbsDistribution::sample(&cov, 999, 1).is_err());
    for alpha in [0.0, 1.0, -0.1, f64::NAN] {
        let req = MaxAbsQuantileRequest { covariance: cov.clone(), alpha, mc_samples: 1000, seed: 1 };
        assert!(max_abs_quantile(&req).is_err());
    }
}
