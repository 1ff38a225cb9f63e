use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DetectionResult;
use crate::error::{Error, Result};
use crate::gee::CorrelationKind;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// JSON form of a detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub format_version: u32,
    /// Working correlation of the fit that produced the effects, if known.
    pub correlation: Option<CorrelationKind>,
    #[serde(flatten)]
    pub result: DetectionResult,
}

impl DetectionReport {
    pub fn new(result: DetectionResult, correlation: Option<CorrelationKind>) -> Self {
        DetectionReport {
            format_version: REPORT_FORMAT_VERSION,
            correlation,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: DetectionReport =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("detection report: {e}")))?;
        if report.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::Input(format!(
                "detection report has format_version {}, expected {REPORT_FORMAT_VERSION}",
                report.format_version
            )));
        }
        Ok(report)
    }

    /// Plain-text step table followed by the detected evaluators.
    pub fn to_table(&self) -> String {
        let r = &self.result;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "alpha = {}, k = {}, trim = {}, variance = {}",
            r.config.alpha,
            r.config.max_outliers,
            r.config.trim(),
            r.config.variance
        );
        let _ = writeln!(out, "{:>4}  {:>10}  {:>12}  {:>12}  {:>8}", "step", "selected", "R_t", "lambda_t", "rejected");
        for s in &r.steps {
            let _ = writeln!(
                out,
                "{:>4}  {:>10}  {:>12.4}  {:>12.4}  {:>8}",
                s.step,
                s.selected,
                s.statistic,
                s.critical_value,
                if s.rejected { "yes" } else { "no" }
            );
        }
        let detected = if r.detected.is_empty() {
            "none".to_string()
        } else {
            r.detected.join(", ")
        };
        let _ = writeln!(out, "k' = {}; detected: {detected}", r.k_prime);
        out
    }
}
