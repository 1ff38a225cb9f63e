//! Detection of outlier evaluators in clustered measurement data.
//!
//! The procedure has two stages. A Gaussian GEE fit with one indicator per
//! evaluator estimates the evaluator effects β̂ together with a model-based
//! and a sandwich covariance. A stepwise modified-ESD test then compares each
//! effect with the truncated mean of the remaining candidates, using Monte
//! Carlo critical values for the largest normalized contrast.
//!
//! ```no_run
//! use evaluator_outliers::{build_design, detect_outliers, fit_gee, load_dataset_from_path};
//! use evaluator_outliers::{CorrelationKind, DetectionConfig, GeeOptions, SchemaConfig};
//!
//! let schema = SchemaConfig::long(&["age".to_string()], &[]);
//! let data = load_dataset_from_path("measurements.csv", &schema)?;
//! let design = build_design(&data)?;
//! let fit = fit_gee(&design, CorrelationKind::Exchangeable, &GeeOptions::default())?;
//! let config = DetectionConfig::default();
//! let result = detect_outliers(
//!     fit.beta_hat.as_slice(),
//!     fit.omega(config.variance),
//!     &fit.evaluator_labels,
//!     &config,
//! )?;
//! println!("detected: {:?}", result.detected);
//! # Ok::<(), evaluator_outliers::Error>(())
//! ```

pub mod cli;
pub mod data;
pub mod detect;
pub mod error;
pub mod fit_report;
pub mod gee;
pub mod mvn;
pub mod plot;
pub mod rng;
pub mod sim;

pub use data::{build_design, load_dataset, load_dataset_from_path, DesignMatrix, EvaluationDataset, ParticipantRecord, SchemaConfig};
pub use detect::{detect_outliers, DetectionConfig, DetectionReport, DetectionResult, StepRecord, Trim};
pub use error::{Error, ErrorClass, Result};
pub use fit_report::FitReport;
pub use gee::{fit_gee, CorrelationKind, GeeFit, GeeOptions, VarianceChoice};
pub use mvn::{max_abs_quantile, sample_mvn, MaxAbsQuantileRequest};
pub use plot::EffectsPlot;
pub use sim::{run_grid, run_replicates, SimulationMetrics, SimulationScenario};
