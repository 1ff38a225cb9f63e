use evaluator_outliers::sim::{generate_dataset, replicate_data_seed, SimulationScenario};
use evaluator_outliers::{build_design, fit_gee, run_replicates, CorrelationKind, GeeOptions, VarianceChoice};

fn small(s: SimulationScenario) -> SimulationScenario {
    SimulationScenario { replicates: 20, ..s }
}

#[test]
fn very_good_prevalence() {
    let ds = generate_dataset(&SimulationScenario::single_null(2.0), 5).unwrap();
    let share = ds.participants().iter().map(|p| p.participant_covariates[2]).sum::<f64>() / 6000.0;
    assert!((share - 0.44).abs() < 0.02, "{share}");
    let lt = ds.participants().iter().map(|p| p.participant_covariates[3]).sum::<f64>() / 6000.0;
    assert!((lt - 0.25).abs() < 0.02, "{lt}");
    assert!(ds.participants().iter().all(|p| p.participant_covariates[2] * p.participant_covariates[3] == 0.0));
}

/// Errors recovered from the outcomes using the known means.
fn errors(s: &SimulationScenario, seed: u64) -> Vec<(f64, f64)> {
    let ds = generate_dataset(s, seed).unwrap();
    let effects = s.effects();
    let labels = s.evaluator_labels();
    ds.participants()
        .iter()
        .map(|p| {
            let j = labels.iter().position(|l| *l == p.evaluator).unwrap();
            let mean = effects[j] + p.participant_covariates.iter().zip(&s.eta).map(|(x, e)| x * e).sum::<f64>();
            (p.outcomes[0] - mean, p.outcomes[1] - mean)
        })
        .collect()
}

fn moments(e: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = e.len() as f64;
    let va = e.iter().map(|x| x.0 * x.0).sum::<f64>() / n;
    let vb = e.iter().map(|x| x.1 * x.1).sum::<f64>() / n;
    let c = e.iter().map(|x| x.0 * x.1).sum::<f64>() / n;
    (va, vb, c / (va * vb).sqrt())
}

#[test]
fn bivariate_errors_have_the_requested_correlation() {
    let (va, vb, r) = moments(&errors(&SimulationScenario::bivariate_null(6.0, 0.8), 2));
    assert!((r - 0.8).abs() < 0.02, "{r}");
    assert!((va / 36.0 - 1.0).abs() < 0.05 && (vb / 36.0 - 1.0).abs() < 0.05, "{va} {vb}");
    let (_, _, r0) = moments(&errors(&SimulationScenario::bivariate_null(6.0, 0.0), 2));
    assert!(r0.abs() < 0.03, "{r0}");
}

#[test]
fn covariate_effects_are_recovered() {
    let s = SimulationScenario::single_outliers(6.0);
    let reps = 100;
    let mut covered = 0;
    for r in 0..reps {
        let design = build_design(&generate_dataset(&s, replicate_data_seed(&s, r)).unwrap()).unwrap();
        let g = fit_gee(&design, CorrelationKind::Independent, &GeeOptions::default()).unwrap();
        let se = g.standard_errors(VarianceChoice::Model);
        let cols = design.gamma_range();
        if (0..4).all(|k| (g.theta_hat[cols.start + k] - s.eta[k]).abs() < 3.0 * se[cols.start + k]) {
            covered += 1;
        }
    }
    // four 3-SE intervals jointly cover with probability about 0.989
    assert!(covered >= 96, "{covered}/{reps}");
}

#[test]
fn runs_are_reproducible() {
    let s = small(SimulationScenario::single_outliers(6.0));
    let a = run_replicates(&s).unwrap();
    let b = run_replicates(&s).unwrap();
    assert_eq!(a, b);
    let c = run_replicates(&SimulationScenario { seed: s.seed + 1, ..s }).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn a_single_replicate_warns() {
    let s = SimulationScenario { replicates: 1, ..SimulationScenario::single_null(2.0) };
    let m = run_replicates(&s).unwrap();
    assert_eq!(m.completed, 1);
    assert!(!m.warnings.is_empty());
}

#[test]
fn strong_outliers_are_found_at_low_noise() {
    let m = run_replicates(&small(SimulationScenario::single_outliers(2.0))).unwrap();
    let (tpr, tnr) = (m.tpr.unwrap(), m.tnr);
    assert!(tpr > 0.98, "{tpr}");
    assert!(tnr > 0.98, "{tnr}");
}
