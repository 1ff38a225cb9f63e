use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gee::{GeeFit, VarianceChoice, WorkingCorrelation};

pub const FIT_FORMAT_VERSION: u32 = 1;

/// JSON form of a GEE fit: coefficients, both covariances of the evaluator
/// effects, and convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub format_version: u32,
    pub column_names: Vec<String>,
    pub evaluator_labels: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub se_model: Vec<f64>,
    pub se_sandwich: Vec<f64>,
    pub beta_hat: Vec<f64>,
    /// Row-major M×M.
    pub omega_model: Vec<Vec<f64>>,
    pub omega_sandwich: Vec<Vec<f64>>,
    pub correlation: WorkingCorrelation,
    pub phi_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub last_relative_change: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl From<&GeeFit> for FitReport {
    fn from(fit: &GeeFit) -> Self {
        FitReport {
            format_version: FIT_FORMAT_VERSION,
            column_names: fit.column_names.clone(),
            evaluator_labels: fit.evaluator_labels.clone(),
            theta_hat: fit.theta_hat.iter().copied().collect(),
            se_model: fit.standard_errors(VarianceChoice::Model).iter().copied().collect(),
            se_sandwich: fit.standard_errors(VarianceChoice::Sandwich).iter().copied().collect(),
            beta_hat: fit.beta_hat.iter().copied().collect(),
            omega_model: rows(&fit.omega_model),
            omega_sandwich: rows(&fit.omega_sandwich),
            correlation: fit.correlation.clone(),
            phi_hat: fit.phi_hat,
            iterations: fit.iterations,
            converged: fit.converged,
            last_relative_change: fit.last_relative_change,
        }
    }
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: FitReport = serde_json::from_str(text).map_err(|e| Error::Input(format!("fit report: {e}")))?;
        if report.format_version != FIT_FORMAT_VERSION {
            return Err(Error::Input(format!(
                "fit report has format_version {}, expected {FIT_FORMAT_VERSION}",
                report.format_version
            )));
        }
        let m = report.beta_hat.len();
        if report.evaluator_labels.len() != m {
            return Err(Error::Input("fit report: labels and effects differ in length".into()));
        }
        for omega in [&report.omega_model, &report.omega_sandwich] {
            if omega.len() != m || omega.iter().any(|r| r.len() != m) {
                return Err(Error::Input(format!("fit report: covariance is not {m}×{m}")));
            }
        }
        Ok(report)
    }

    pub fn omega(&self, choice: VarianceChoice) -> DMatrix<f64> {
        let rows = match choice {
            VarianceChoice::Model => &self.omega_model,
            VarianceChoice::Sandwich => &self.omega_sandwich,
        };
        let m = rows.len();
        DMatrix::from_fn(m, m, |i, j| rows[i][j])
    }

    /// Coefficient table: name, estimate, model-based and sandwich SE.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("column,estimate,se_model,se_sandwich\n");
        for (i, name) in self.column_names.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                name, self.theta_hat[i], self.se_model[i], self.se_sandwich[i]
            ));
        }
        out
    }
}
