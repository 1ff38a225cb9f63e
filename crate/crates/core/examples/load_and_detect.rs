// Write a simulated study to CSV, load it back through a schema, fit the
// GEE model and run stepwise detection at several significance levels.
//
// ```bash
// cargo run --example load_and_detect
// ```

use std::error::Error;
use std::fs::File;

use evaluator_outliers::cli::detect_at_alphas;
use evaluator_outliers::data::write_long;
use evaluator_outliers::sim::{generate_dataset, SimulationScenario};
use evaluator_outliers::{
    build_design, fit_gee, load_dataset_from_path, CorrelationKind, DetectionConfig, DetectionReport, GeeOptions,
    SchemaConfig, VarianceChoice,
};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    // three planted outliers among 20 evaluators, two outcomes per participant
    let scenario = SimulationScenario {
        n_evaluators: 20,
        participants_per_evaluator: 60,
        n_significant: 2,
        n_intermediate: 1,
        ..SimulationScenario::bivariate_outliers(4.0, 0.5)
    };
    let dataset = generate_dataset(&scenario, 17)?;

    let dir = std::env::temp_dir().join("evaluator-outliers-load-and-detect");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("study.csv");
    write_long(&dataset, File::create(&path)?)?;

    let schema = SchemaConfig::from_toml_str(
        r#"
        layout = "long"
        covariates = ["age", "age_sq", "very_good", "little_trouble"]
        "#,
    )?;
    let loaded = load_dataset_from_path(&path, &schema)?;
    assert_eq!(loaded, dataset);

    let design = build_design(&loaded)?;
    let fit = fit_gee(&design, CorrelationKind::Exchangeable, &GeeOptions::default())?;
    println!("nu = {:?}, phi = {:.3}", fit.correlation, fit.phi_hat);

    let config = DetectionConfig {
        max_outliers: 5,
        variance: VarianceChoice::Sandwich,
        mc_samples: 20_000,
        seed: 5,
        ..Default::default()
    };
    let results = detect_at_alphas(
        fit.beta_hat.as_slice(),
        fit.omega(config.variance),
        &fit.evaluator_labels,
        &config,
        &[0.05, 0.1, 0.3],
    )?;
    for r in &results {
        print!("{}", DetectionReport::new(r.clone(), Some(CorrelationKind::Exchangeable)).to_table());
    }
    // detected sets grow with alpha
    for pair in results.windows(2) {
        assert!(pair[0].detected.iter().all(|d| pair[1].is_detected(d)));
    }
    assert!(["1", "2"].iter().all(|l| results[0].is_detected(l)));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
