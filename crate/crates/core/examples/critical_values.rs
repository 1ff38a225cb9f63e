// Monte Carlo quantiles of the largest absolute component of a normal
// vector: independent components against the closed form, and the collapse
// to one component under perfect correlation.
//
// ```bash
// cargo run --example critical_values
// ```

use std::error::Error;

use evaluator_outliers::mvn::MaxAbsDistribution;
use evaluator_outliers::{max_abs_quantile, MaxAbsQuantileRequest};
use nalgebra::DMatrix;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    println!("{:>4} {:>6} {:>8}", "d", "alpha", "c");
    for d in [1, 5, 10, 45] {
        // one set of draws answers every alpha
        let dist = MaxAbsDistribution::sample(&DMatrix::identity(d, d), 50_000, 11)?;
        for alpha in [0.05, 0.3] {
            println!("{d:>4} {alpha:>6} {:>8.4}", dist.quantile(alpha));
        }
    }

    let nearly_one = DMatrix::from_fn(10, 10, |i, j| if i == j { 1.0 } else { 1.0 - 1e-9 });
    let c = max_abs_quantile(&MaxAbsQuantileRequest {
        covariance: nearly_one,
        alpha: 0.05,
        mc_samples: 50_000,
        seed: 2,
    })?;
    println!("perfectly correlated, d = 10: c = {c:.4}");
    assert!((c - 1.96).abs() < 0.05);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
