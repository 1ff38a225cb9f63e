//! Stepwise modified-ESD testing over estimated evaluator effects.
//!
//! At step t the candidate set I_t holds the evaluators not yet selected.
//! Each candidate's deviation from the truncated mean of I_t is studentized
//! with the covariance of the effects; the largest squared ratio R_t picks
//! o_t, which is removed before the next step. The critical value λ_t is the
//! squared (1−α) quantile of the largest absolute normalized contrast under
//! the null, estimated by Monte Carlo. The number of detected outliers is the
//! last step whose statistic exceeds its critical value.

mod report;
mod trim;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mvn::{check_alpha, MaxAbsDistribution, DEFAULT_MC_SAMPLES, MIN_MC_SAMPLES};
use crate::rng::SeedStream;

pub use crate::gee::VarianceChoice;
pub use report::{DetectionReport, REPORT_FORMAT_VERSION};
pub use trim::{contrast_vector, trimmed_set, truncated_mean, Trim};

/// Contrast variances at or below this fraction of the mean variance are
/// treated as zero.
const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub alpha: f64,
    /// k, the number of steps.
    pub max_outliers: usize,
    /// Defaults to `Count(max_outliers)`.
    pub trim: Option<Trim>,
    pub variance: VarianceChoice,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            alpha: 0.05,
            max_outliers: 10,
            trim: None,
            variance: VarianceChoice::Model,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 1,
        }
    }
}

impl DetectionConfig {
    pub fn trim(&self) -> Trim {
        self.trim.unwrap_or(Trim::Count(self.max_outliers))
    }

    /// The same configuration with defaults written out.
    pub fn resolved(&self) -> Self {
        DetectionConfig {
            trim: Some(self.trim()),
            ..self.clone()
        }
    }

    /// Checks the configuration against `m` evaluators.
    pub fn validate(&self, m: usize) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.max_outliers == 0 {
            return Err(Error::Config("max_outliers must be at least 1".into()));
        }
        if self.max_outliers >= m {
            return Err(Error::Config(format!(
                "max_outliers = {} must be smaller than the {m} evaluators",
                self.max_outliers
            )));
        }
        if self.mc_samples < MIN_MC_SAMPLES {
            return Err(Error::Config(format!(
                "mc_samples = {} is below the minimum of {MIN_MC_SAMPLES}",
                self.mc_samples
            )));
        }
        let trim = self.trim();
        for t in 1..=self.max_outliers {
            trim.check_leaves_one(m - t + 1)?;
        }
        Ok(())
    }
}

/// One row of the per-step table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// t, starting at 1.
    pub step: usize,
    /// I_t, as evaluator labels in evaluator order.
    pub candidates: Vec<String>,
    /// o_t
    pub selected: String,
    /// R_t
    pub statistic: f64,
    /// λ_t
    pub critical_value: f64,
    /// R_t > λ_t
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Effective configuration, defaults resolved.
    pub config: DetectionConfig,
    pub evaluator_labels: Vec<String>,
    pub beta_hat: Vec<f64>,
    pub steps: Vec<StepRecord>,
    /// k′
    pub k_prime: usize,
    /// o_1 … o_{k′}
    pub detected: Vec<String>,
}

impl DetectionResult {
    pub fn is_detected(&self, label: &str) -> bool {
        self.detected.iter().any(|d| d == label)
    }
}

/// Largest step whose statistic exceeds its critical value, 0 if none.
pub fn k_prime(steps: &[StepRecord]) -> usize {
    steps.iter().rposition(|s| s.rejected).map_or(0, |i| i + 1)
}

/// Outcome of one modified-ESD step, in positions of the candidate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MesdStep {
    /// R_t
    pub statistic: f64,
    /// Position of o_t.
    pub selected: usize,
    /// The trimmed set at this step.
    pub trimmed: Vec<bool>,
}

/// R_t = max_m (L_mᵀβ)² / (L_mᵀ Ω L_m) over the candidate effects `beta_sub`
/// with covariance `omega_sub`. Ties go to the lowest position.
pub fn mesd_step(beta_sub: &[f64], omega_sub: &DMatrix<f64>, trim: Trim) -> Result<MesdStep> {
    mesd_step_labeled(beta_sub, omega_sub, trim, |m| format!("#{m}"))
}

fn mesd_step_labeled(
    beta: &[f64],
    omega: &DMatrix<f64>,
    trim: Trim,
    label: impl Fn(usize) -> String,
) -> Result<MesdStep> {
    let d = beta.len();
    if omega.nrows() != d || omega.ncols() != d {
        return Err(Error::Input(format!(
            "covariance is {}×{} for {d} effects",
            omega.nrows(),
            omega.ncols()
        )));
    }
    let g = trim.check_leaves_one(d)?;
    let trimmed = trimmed_set(beta, g);
    let variances = contrast_variances(omega, &trimmed);
    let kept: Vec<usize> = (0..d).filter(|&h| !trimmed[h]).collect();
    let w = 1.0 / kept.len() as f64;
    let floor = degenerate_floor(omega);

    let mut best = (f64::NEG_INFINITY, 0);
    for (m, &var) in variances.iter().enumerate() {
        if !(var > floor) {
            return Err(Error::DegenerateCovariance { candidate: label(m) });
        }
        let deviation = w * kept.iter().map(|&h| beta[m] - beta[h]).sum::<f64>();
        let ratio = deviation * deviation / variances[m];
        if ratio > best.0 {
            best = (ratio, m);
        }
    }
    Ok(MesdStep {
        statistic: best.0,
        selected: best.1,
        trimmed,
    })
}

fn degenerate_floor(omega: &DMatrix<f64>) -> f64 {
    DEGENERATE_VARIANCE * omega.diagonal().mean().max(0.0)
}

/// L_mᵀ Ω L_m for every m, using Ω_mm − 2(Ωu)_m/n' + uᵀΩu/n'² with u the
/// indicator of the untrimmed positions.
fn contrast_variances(omega: &DMatrix<f64>, trimmed: &[bool]) -> Vec<f64> {
    let d = trimmed.len();
    let kept: Vec<usize> = (0..d).filter(|&h| !trimmed[h]).collect();
    let w = 1.0 / kept.len() as f64;
    let row_sums: Vec<f64> = (0..d).map(|m| kept.iter().map(|&h| omega[(m, h)]).sum()).collect();
    let total: f64 = kept.iter().map(|&h| row_sums[h]).sum();
    (0..d)
        .map(|m| omega[(m, m)] - 2.0 * w * row_sums[m] + w * w * total)
        .collect()
}

/// The part of the procedure that does not depend on α: candidate sets,
/// trimmed sets, statistics and selections for every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStep {
    /// I_t as evaluator positions, ascending.
    pub candidates: Vec<usize>,
    /// Trimmed flags aligned with `candidates`.
    pub trimmed: Vec<bool>,
    pub statistic: f64,
    /// Evaluator position of o_t.
    pub selected: usize,
}

/// Runs all `config.max_outliers` steps; no early stopping.
pub fn statistic_chain(
    beta_hat: &[f64],
    omega: &DMatrix<f64>,
    labels: &[String],
    config: &DetectionConfig,
) -> Result<Vec<ChainStep>> {
    let m = beta_hat.len();
    check_inputs(beta_hat, omega, labels)?;
    config.validate(m)?;
    let trim = config.trim();
    let mut candidates: Vec<usize> = (0..m).collect();
    let mut chain = Vec::with_capacity(config.max_outliers);
    for _ in 0..config.max_outliers {
        let beta_sub: Vec<f64> = candidates.iter().map(|&j| beta_hat[j]).collect();
        let omega_sub = submatrix(omega, &candidates);
        let step = mesd_step_labeled(&beta_sub, &omega_sub, trim, |p| labels[candidates[p]].clone())?;
        let selected = candidates[step.selected];
        chain.push(ChainStep {
            candidates: candidates.clone(),
            trimmed: step.trimmed,
            statistic: step.statistic,
            selected,
        });
        candidates.remove(step.selected);
    }
    Ok(chain)
}

fn check_inputs(beta_hat: &[f64], omega: &DMatrix<f64>, labels: &[String]) -> Result<()> {
    let m = beta_hat.len();
    if labels.len() != m {
        return Err(Error::Input(format!("{} labels for {m} effects", labels.len())));
    }
    if omega.nrows() != m || omega.ncols() != m {
        return Err(Error::Input(format!(
            "covariance is {}×{} for {m} effects",
            omega.nrows(),
            omega.ncols()
        )));
    }
    if beta_hat.iter().chain(omega.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Input("effects or covariance contain non-finite values".into()));
    }
    let asymmetry = (omega - omega.transpose()).amax();
    if asymmetry > 1e-10 * omega.amax() {
        return Err(Error::Input(format!(
            "covariance is not symmetric (largest difference {asymmetry:.3e})"
        )));
    }
    Ok(())
}

pub(crate) fn submatrix(omega: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| omega[(idx[a], idx[b])])
}

/// A_t Ω_{I_t} A_tᵀ, where the rows of A_t are the step's contrasts scaled to
/// unit variance.
pub fn normalized_contrast_covariance(omega_sub: &DMatrix<f64>, trimmed: &[bool]) -> Result<DMatrix<f64>> {
    let d = trimmed.len();
    let variances = contrast_variances(omega_sub, trimmed);
    let floor = degenerate_floor(omega_sub);
    let mut a = DMatrix::zeros(d, d);
    for (m, &var) in variances.iter().enumerate() {
        if !(var > floor) {
            return Err(Error::DegenerateCovariance {
                candidate: format!("#{m}"),
            });
        }
        let l = contrast_vector(m, trimmed)?;
        a.row_mut(m).copy_from(&(l.transpose() / var.sqrt()));
    }
    let cov = &a * omega_sub * a.transpose();
    Ok((&cov + cov.transpose()) * 0.5)
}

/// Monte Carlo null distribution of max |Z| at every step of `chain`.
/// Step t draws from `SeedStream::new(seed).derive(t)`.
pub fn critical_distributions(
    omega: &DMatrix<f64>,
    chain: &[ChainStep],
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<MaxAbsDistribution>> {
    let root = SeedStream::new(seed);
    chain
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let omega_sub = submatrix(omega, &step.candidates);
            let cov = normalized_contrast_covariance(&omega_sub, &step.trimmed)?;
            MaxAbsDistribution::sample(&cov, mc_samples, root.derive(i as u64 + 1).seed())
        })
        .collect()
}

/// λ_1 … λ_k for the steps of `chain`.
pub fn critical_values(omega: &DMatrix<f64>, chain: &[ChainStep], config: &DetectionConfig) -> Result<Vec<f64>> {
    check_alpha(config.alpha)?;
    let dists = critical_distributions(omega, chain, config.mc_samples, config.seed)?;
    Ok(dists.iter().map(|d| d.quantile(config.alpha).powi(2)).collect())
}

/// Combines a statistic chain with critical values into a result.
pub fn assemble_result(
    chain: &[ChainStep],
    critical: &[f64],
    beta_hat: &[f64],
    labels: &[String],
    config: &DetectionConfig,
) -> DetectionResult {
    let steps: Vec<StepRecord> = chain
        .iter()
        .zip(critical)
        .enumerate()
        .map(|(i, (step, &lambda))| StepRecord {
            step: i + 1,
            candidates: step.candidates.iter().map(|&j| labels[j].clone()).collect(),
            selected: labels[step.selected].clone(),
            statistic: step.statistic,
            critical_value: lambda,
            rejected: step.statistic > lambda,
        })
        .collect();
    let k_prime = k_prime(&steps);
    DetectionResult {
        config: config.resolved(),
        evaluator_labels: labels.to_vec(),
        beta_hat: beta_hat.to_vec(),
        detected: steps[..k_prime].iter().map(|s| s.selected.clone()).collect(),
        steps,
        k_prime,
    }
}

/// Runs the full stepwise procedure on estimated effects and their covariance.
pub fn detect_outliers(
    beta_hat: &[f64],
    omega: &DMatrix<f64>,
    labels: &[String],
    config: &DetectionConfig,
) -> Result<DetectionResult> {
    let chain = statistic_chain(beta_hat, omega, labels, config)?;
    let critical = critical_values(omega, &chain, config)?;
    Ok(assemble_result(&chain, &critical, beta_hat, labels, config))
}
