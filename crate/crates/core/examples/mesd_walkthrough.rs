// One modified-ESD step by hand, then the full stepwise chain with its
// critical values on a small example.
//
// ```bash
// cargo run --example mesd_walkthrough
// ```

use std::error::Error;

use evaluator_outliers::detect::{
    contrast_vector, critical_values, mesd_step, statistic_chain, trimmed_set, truncated_mean,
};
use evaluator_outliers::{detect_outliers, DetectionConfig, Trim};
use nalgebra::{DMatrix, DVector};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let beta = [0.0, 0.0, 10.0];
    let step = mesd_step(&beta, &DMatrix::identity(3, 3), Trim::Count(0))?;
    // (20/3)² / (2/3)
    println!("R = {:.4}, selected position {}", step.statistic, step.selected);

    let beta = [3.0, 1.0, 9.0, 4.0, 5.0];
    let trimmed = trimmed_set(&beta, 1);
    let l = contrast_vector(2, &trimmed)?;
    let mean = truncated_mean(&beta, Trim::Count(1))?;
    println!("trimmed {trimmed:?}, L = {:?}", l.as_slice());
    println!("L'beta = {} = {} - {mean}", l.dot(&DVector::from_row_slice(&beta)), beta[2]);

    let labels: Vec<String> = ["a", "b", "c", "d", "e", "f", "g", "h"].map(String::from).to_vec();
    let beta = [0.1, -0.2, 4.0, 0.0, 0.3, -0.1, 2.5, 0.2];
    let omega = DMatrix::from_fn(8, 8, |i, j| if i == j { 0.25 } else { 0.02 });
    let config = DetectionConfig {
        max_outliers: 3,
        trim: Some(Trim::Count(1)),
        mc_samples: 20_000,
        ..Default::default()
    };
    let chain = statistic_chain(&beta, &omega, &labels, &config)?;
    let lambdas = critical_values(&omega, &chain, &config)?;
    for (t, (s, lambda)) in chain.iter().zip(&lambdas).enumerate() {
        println!(
            "step {}: {} candidates, selected {}, R = {:.2}, lambda = {:.2}",
            t + 1,
            s.candidates.len(),
            labels[s.selected],
            s.statistic,
            lambda
        );
    }
    let result = detect_outliers(&beta, &omega, &labels, &config)?;
    println!("k' = {}, detected {:?}", result.k_prime, result.detected);
    assert_eq!(result.detected, ["c", "g"]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
