use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::DetectionConfig;
use crate::error::{Error, Result};
use crate::gee::{CorrelationKind, VarianceChoice};

/// Monte Carlo draws per critical value in simulation runs. Each replicate
/// draws its own critical values, so their noise averages out over replicates.
pub const SIMULATION_MC_SAMPLES: usize = 10_000;

/// Data-generating parameters and detection settings for one simulation.
///
/// Evaluators are labelled `1..=n_evaluators`. The first `n_significant`
/// get `beta_significant`, the next `n_intermediate` get `beta_intermediate`
/// and the rest `beta_normal`. Participants are assigned to evaluators in
/// contiguous blocks.
///
/// `detection.seed` is not used: replicate `r` takes its detection seed from
/// `seed`. A `[detection]` table in a scenario file starts from
/// [`DetectionConfig::default`], so set `mc_samples` there explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationScenario {
    pub n_evaluators: usize,
    pub participants_per_evaluator: usize,
    /// 1 or 2 outcome elements per participant.
    pub outcome_arity: usize,
    pub sigma: f64,
    /// Correlation between the two outcome errors (arity 2 only).
    pub rho: f64,
    /// Coefficients of age, age², very good, a little trouble.
    pub eta: [f64; 4],
    pub beta_normal: f64,
    pub beta_intermediate: f64,
    pub beta_significant: f64,
    pub n_intermediate: usize,
    pub n_significant: usize,
    pub age_mean: f64,
    pub age_sd: f64,
    pub prevalence_very_good: f64,
    pub prevalence_little_trouble: f64,
    pub replicates: usize,
    /// Working correlation; independent for arity 1 and exchangeable for
    /// arity 2 when absent.
    pub correlation: Option<CorrelationKind>,
    pub detection: DetectionConfig,
    pub seed: u64,
    pub grid: Option<Grid>,
}

/// Axes crossed by a grid run. An empty axis keeps the scenario's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub variance: Vec<VarianceChoice>,
}

impl Default for SimulationScenario {
    fn default() -> Self {
        SimulationScenario {
            n_evaluators: 50,
            participants_per_evaluator: 120,
            outcome_arity: 1,
            sigma: 2.0,
            rho: 0.5,
            eta: [-2.73, 0.03, 0.03, 3.32],
            beta_normal: 66.95,
            beta_intermediate: 70.10,
            beta_significant: 75.10,
            n_intermediate: 0,
            n_significant: 0,
            age_mean: 56.56,
            age_sd: 4.36,
            prevalence_very_good: 0.44,
            prevalence_little_trouble: 0.25,
            replicates: 1000,
            correlation: None,
            detection: DetectionConfig {
                mc_samples: SIMULATION_MC_SAMPLES,
                ..DetectionConfig::default()
            },
            seed: 2024,
            grid: None,
        }
    }
}

impl SimulationScenario {
    /// Null scenario with a single outcome per participant.
    pub fn single_null(sigma: f64) -> Self {
        SimulationScenario {
            sigma,
            ..Default::default()
        }
    }

    /// Five significant and five intermediate outliers, single outcome.
    pub fn single_outliers(sigma: f64) -> Self {
        SimulationScenario {
            n_significant: 5,
            n_intermediate: 5,
            ..Self::single_null(sigma)
        }
    }

    pub fn bivariate_null(sigma: f64, rho: f64) -> Self {
        SimulationScenario {
            outcome_arity: 2,
            rho,
            ..Self::single_null(sigma)
        }
    }

    pub fn bivariate_outliers(sigma: f64, rho: f64) -> Self {
        SimulationScenario {
            outcome_arity: 2,
            rho,
            ..Self::single_outliers(sigma)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: SimulationScenario =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {}", e.message())))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn n_outliers(&self) -> usize {
        self.n_significant + self.n_intermediate
    }

    pub fn correlation(&self) -> CorrelationKind {
        self.correlation.unwrap_or(if self.outcome_arity > 1 {
            CorrelationKind::Exchangeable
        } else {
            CorrelationKind::Independent
        })
    }

    /// Effect of each evaluator, in label order.
    pub fn effects(&self) -> Vec<f64> {
        (0..self.n_evaluators)
            .map(|j| {
                if j < self.n_significant {
                    self.beta_significant
                } else if j < self.n_outliers() {
                    self.beta_intermediate
                } else {
                    self.beta_normal
                }
            })
            .collect()
    }

    pub fn evaluator_labels(&self) -> Vec<String> {
        (1..=self.n_evaluators).map(|j| j.to_string()).collect()
    }

    /// Checks everything except the detection settings and the grid.
    pub fn validate_data(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_evaluators == 0 {
            return fail("n_evaluators must be positive".into());
        }
        if self.participants_per_evaluator == 0 {
            return fail("participants_per_evaluator must be positive".into());
        }
        if !matches!(self.outcome_arity, 1 | 2) {
            return fail(format!("outcome_arity must be 1 or 2, got {}", self.outcome_arity));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return fail(format!("sigma = {} must be finite and nonnegative", self.sigma));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return fail(format!("rho = {} must lie in (-1, 1)", self.rho));
        }
        if !(self.age_sd.is_finite() && self.age_sd >= 0.0) || !self.age_mean.is_finite() {
            return fail("age_mean and age_sd must be finite, age_sd nonnegative".into());
        }
        let (a, b) = (self.prevalence_very_good, self.prevalence_little_trouble);
        if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0) {
            return fail(format!("prevalences {a} and {b} must be nonnegative with sum at most 1"));
        }
        if self.n_outliers() >= self.n_evaluators {
            return fail(format!(
                "{} planted outliers leave no normal evaluator among {}",
                self.n_outliers(),
                self.n_evaluators
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_data()?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if self.outcome_arity == 1 && self.correlation() != CorrelationKind::Independent {
            return Err(Error::Config(
                "a single outcome per participant needs the independent working correlation".into(),
            ));
        }
        self.detection.validate(self.n_evaluators)?;
        if let Some(grid) = &self.grid {
            for &sigma in &grid.sigma {
                SimulationScenario { sigma, grid: None, ..self.clone() }.validate()?;
            }
            for &rho in &grid.rho {
                SimulationScenario { rho, grid: None, ..self.clone() }.validate()?;
            }
            for &alpha in &grid.alpha {
                crate::mvn::check_alpha(alpha)?;
            }
        }
        Ok(())
    }
}
