// Plot estimated evaluator effects with the truncated mean and the
// outliers detected at two significance levels.
//
// ```bash
// cargo run --example plot_effects
// ```

use std::error::Error;

use evaluator_outliers::cli::detect_at_alphas;
use evaluator_outliers::sim::{generate_dataset, SimulationScenario};
use evaluator_outliers::{build_design, fit_gee, CorrelationKind, DetectionConfig, EffectsPlot, GeeOptions};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let scenario = SimulationScenario {
        n_evaluators: 30,
        participants_per_evaluator: 80,
        n_significant: 2,
        n_intermediate: 2,
        ..SimulationScenario::single_outliers(6.0)
    };
    let design = build_design(&generate_dataset(&scenario, 8)?)?;
    let fit = fit_gee(&design, CorrelationKind::Independent, &GeeOptions::default())?;
    let config = DetectionConfig {
        max_outliers: 6,
        mc_samples: 20_000,
        ..Default::default()
    };
    let runs = detect_at_alphas(
        fit.beta_hat.as_slice(),
        &fit.omega_model,
        &fit.evaluator_labels,
        &config,
        &[0.05, 0.3],
    )?;
    let beta: Vec<f64> = fit.beta_hat.iter().copied().collect();
    let plot = EffectsPlot::new(&fit.evaluator_labels, &beta, config.trim(), &runs)?;

    let dir = std::env::temp_dir().join("evaluator-outliers-plot");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("effects.svg"), plot.to_svg())?;
    std::fs::write(dir.join("effects.csv"), plot.to_csv())?;
    println!("wrote {}", dir.join("effects.svg").display());
    println!("truncated mean {:.3}", plot.truncated_mean);
    for (label, alpha) in plot.labels.iter().zip(&plot.first_alpha) {
        if let Some(a) = alpha {
            println!("evaluator {label} first detected at alpha = {a}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
