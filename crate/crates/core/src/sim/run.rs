use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_dataset, SimulationScenario};
use crate::data::build_design;
use crate::detect::{critical_distributions, statistic_chain, DetectionConfig};
use crate::error::{Error, Result};
use crate::gee::{fit_gee, GeeOptions, VarianceChoice};
use crate::rng::{SeedStream, DATA, DETECTION};

pub const SIMULATION_FORMAT_VERSION: u32 = 1;

/// Replicate failures above this fraction abort the run.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

const KEPT_FAILURE_MESSAGES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    /// Detected evaluator labels in selection order.
    pub detected: Vec<String>,
    pub true_positives: usize,
    pub false_positives: usize,
}

/// Rates for one (σ, ρ, α, variance) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMetrics {
    pub sigma: f64,
    pub rho: f64,
    pub alpha: f64,
    pub variance: VarianceChoice,
    pub replicates: usize,
    pub completed: usize,
    pub failures: usize,
    pub n_outliers: usize,
    pub n_normal: usize,
    /// Fraction of replicates with any detection; null scenarios only.
    pub type_i_rate: Option<f64>,
    pub type_i_se: Option<f64>,
    /// Mean over replicates of detected planted outliers / planted outliers.
    pub tpr: Option<f64>,
    pub tpr_se: Option<f64>,
    /// Mean over replicates of undetected normal evaluators / normal evaluators.
    pub tnr: f64,
    pub tnr_se: f64,
    pub mean_detected: f64,
    pub warnings: Vec<String>,
    pub failure_messages: Vec<String>,
    pub records: Vec<ReplicateRecord>,
}

/// Scenario echo plus one metrics block per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub format_version: u32,
    pub scenario: SimulationScenario,
    pub cells: Vec<SimulationMetrics>,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn cell(&self, sigma: f64, rho: f64, alpha: f64, variance: VarianceChoice) -> Option<&SimulationMetrics> {
        self.cells
            .iter()
            .find(|c| c.sigma == sigma && c.rho == rho && c.alpha == alpha && c.variance == variance)
    }
}

/// Detected evaluator positions for every (variance, α) pair.
type Detections = Vec<Vec<Vec<usize>>>;

/// Generates, fits and tests replicate `r`. The fit and the Monte Carlo draws
/// are shared by every α; the result for each pair equals a separate
/// `detect_outliers` run with that α and variance.
fn replicate_detections(
    s: &SimulationScenario,
    r: usize,
    alphas: &[f64],
    variances: &[VarianceChoice],
) -> Result<Detections> {
    let stream = SeedStream::new(s.seed).derive(r as u64);
    let data = generate_dataset(s, stream.derive(DATA).seed())?;
    let design = build_design(&data)?;
    let fit = fit_gee(&design, s.correlation(), &GeeOptions::default())?;
    let seed = stream.derive(DETECTION).seed();
    variances
        .iter()
        .map(|&variance| {
            let config = DetectionConfig {
                variance,
                seed,
                ..s.detection.clone()
            };
            let omega = fit.omega(variance);
            let chain = statistic_chain(fit.beta_hat.as_slice(), omega, &fit.evaluator_labels, &config)?;
            let dists = critical_distributions(omega, &chain, config.mc_samples, seed)?;
            Ok(alphas
                .iter()
                .map(|&alpha| {
                    let k = chain
                        .iter()
                        .zip(&dists)
                        .rposition(|(step, dist)| step.statistic > dist.quantile(alpha).powi(2))
                        .map_or(0, |i| i + 1);
                    chain[..k].iter().map(|step| step.selected).collect()
                })
                .collect())
        })
        .collect()
}

/// Detection settings of replicate `r`, as passed to `detect_outliers`.
pub fn replicate_detection_config(s: &SimulationScenario, r: usize) -> DetectionConfig {
    DetectionConfig {
        seed: SeedStream::new(s.seed).derive(r as u64).derive(DETECTION).seed(),
        ..s.detection.clone()
    }
}

/// Seed of the data generator for replicate `r`.
pub fn replicate_data_seed(s: &SimulationScenario, r: usize) -> u64 {
    SeedStream::new(s.seed).derive(r as u64).derive(DATA).seed()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every replicate of `s` (its σ and ρ) and scores each
/// (variance, α) pair. Cells come back variance-major.
pub fn run_cell(s: &SimulationScenario, alphas: &[f64], variances: &[VarianceChoice]) -> Result<Vec<SimulationMetrics>> {
    s.validate()?;
    for &alpha in alphas {
        crate::mvn::check_alpha(alpha)?;
    }
    let outcomes: Vec<Result<Detections>> = (0..s.replicates)
        .into_par_iter()
        .map(|r| replicate_detections(s, r, alphas, variances))
        .collect();

    let failures: Vec<String> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(r, o)| o.as_ref().err().map(|e| format!("replicate {r}: {e}")))
        .collect();
    if failures.len() as f64 > MAX_FAILURE_FRACTION * s.replicates as f64 {
        return Err(Error::Harness(format!(
            "{} of {} replicates failed (σ = {}, ρ = {}); first: {}",
            failures.len(),
            s.replicates,
            s.sigma,
            s.rho,
            failures[0]
        )));
    }

    let labels = s.evaluator_labels();
    let n_out = s.n_outliers();
    let n_normal = s.n_evaluators - n_out;
    let mut cells = Vec::with_capacity(alphas.len() * variances.len());
    for (vi, &variance) in variances.iter().enumerate() {
        for (ai, &alpha) in alphas.iter().enumerate() {
            let records: Vec<ReplicateRecord> = outcomes
                .iter()
                .enumerate()
                .filter_map(|(r, o)| o.as_ref().ok().map(|d| (r, &d[vi][ai])))
                .map(|(replicate, detected)| {
                    let true_positives = detected.iter().filter(|&&j| j < n_out).count();
                    ReplicateRecord {
                        replicate,
                        detected: detected.iter().map(|&j| labels[j].clone()).collect(),
                        true_positives,
                        false_positives: detected.len() - true_positives,
                    }
                })
                .collect();
            cells.push(score(s, alpha, variance, records, n_normal, &failures));
        }
    }
    Ok(cells)
}

fn score(
    s: &SimulationScenario,
    alpha: f64,
    variance: VarianceChoice,
    records: Vec<ReplicateRecord>,
    n_normal: usize,
    failures: &[String],
) -> SimulationMetrics {
    let n_out = s.n_outliers();
    let completed = records.len();
    let tnr: Vec<f64> = records
        .iter()
        .map(|r| 1.0 - r.false_positives as f64 / n_normal as f64)
        .collect();
    let (tnr, tnr_se) = mean_and_se(&tnr);
    let (tpr, tpr_se) = if n_out > 0 {
        let v: Vec<f64> = records.iter().map(|r| r.true_positives as f64 / n_out as f64).collect();
        let (m, se) = mean_and_se(&v);
        (Some(m), Some(se))
    } else {
        (None, None)
    };
    let (type_i_rate, type_i_se) = if n_out == 0 {
        let p = records.iter().filter(|r| !r.detected.is_empty()).count() as f64 / completed as f64;
        (Some(p), Some((p * (1.0 - p) / completed as f64).sqrt()))
    } else {
        (None, None)
    };
    let mut warnings = Vec::new();
    if s.replicates == 1 {
        warnings.push("a single replicate gives 0/1 rates with no standard error".to_string());
    }
    if !failures.is_empty() {
        warnings.push(format!("{} of {} replicates failed and were excluded", failures.len(), s.replicates));
    }
    SimulationMetrics {
        sigma: s.sigma,
        rho: s.rho,
        alpha,
        variance,
        replicates: s.replicates,
        completed,
        failures: failures.len(),
        n_outliers: n_out,
        n_normal,
        type_i_rate,
        type_i_se,
        tpr,
        tpr_se,
        tnr,
        tnr_se,
        mean_detected: records.iter().map(|r| r.detected.len() as f64).sum::<f64>() / completed as f64,
        warnings,
        failure_messages: failures.iter().take(KEPT_FAILURE_MESSAGES).cloned().collect(),
        records,
    }
}

/// Metrics for the scenario's own σ, ρ, α and variance choice.
pub fn run_replicates(s: &SimulationScenario) -> Result<SimulationMetrics> {
    let mut cells = run_cell(s, &[s.detection.alpha], &[s.detection.variance])?;
    Ok(cells.remove(0))
}

/// Crosses the grid axes of `s` (σ × ρ × variance × α). Each (σ, ρ) pair
/// generates its own replicates; α and the variance choice reuse them.
pub fn run_grid(s: &SimulationScenario) -> Result<SimulationReport> {
    s.validate()?;
    let grid = s.grid.clone().unwrap_or_default();
    let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let sigmas = or(&grid.sigma, s.sigma);
    let rhos = or(&grid.rho, s.rho);
    let alphas = or(&grid.alpha, s.detection.alpha);
    let variances = if grid.variance.is_empty() {
        vec![s.detection.variance]
    } else {
        grid.variance.clone()
    };
    let mut cells = Vec::new();
    for &rho in &rhos {
        for &sigma in &sigmas {
            let cell = SimulationScenario {
                sigma,
                rho,
                grid: None,
                ..s.clone()
            };
            cells.extend(run_cell(&cell, &alphas, &variances)?);
        }
    }
    Ok(SimulationReport {
        format_version: SIMULATION_FORMAT_VERSION,
        scenario: s.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_out: usize) -> SimulationScenario {
        SimulationScenario {
            n_evaluators: 8,
            participants_per_evaluator: 15,
            n_significant: n_out,
            replicates: 4,
            detection: DetectionConfig {
                max_outliers: 2,
                mc_samples: 1000,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn grid_cells_match_single_runs() {
        let s = small(0);
        let grid = run_cell(&s, &[0.05, 0.3], &[VarianceChoice::Model, VarianceChoice::Sandwich]).unwrap();
        assert_eq!(grid.len(), 4);
        let single = run_replicates(&SimulationScenario {
            detection: DetectionConfig {
                alpha: 0.3,
                variance: VarianceChoice::Sandwich,
                ..s.detection.clone()
            },
            ..s.clone()
        })
        .unwrap();
        assert_eq!(grid[3], single);
    }

    #[test]
    fn planted_outliers_are_found_at_low_noise() {
        let m = run_replicates(&small(1)).unwrap();
        assert_eq!(m.tpr, Some(1.0));
        assert!(m.type_i_rate.is_none());
        assert_eq!(m.completed, 4);
    }

    #[test]
    fn single_replicate_warns() {
        let m = run_replicates(&SimulationScenario { replicates: 1, ..small(0) }).unwrap();
        assert!(!m.warnings.is_empty());
        assert_eq!(m.tnr_se, 0.0);
        assert!(matches!(m.type_i_rate, Some(p) if p == 0.0 || p == 1.0));
    }
}
