//! Simulation of evaluator studies with planted outliers, and the rates
//! used to judge the detector: type I error in null scenarios, TPR and TNR
//! otherwise.
//!
//! Replicate `r` draws its data from `SeedStream::new(seed).derive(r)
//! .derive(DATA)` and its critical values from `.derive(DETECTION)`, so a
//! scenario gives the same rates for any thread count.

mod generate;
mod run;
mod scenario;
mod tables;

pub use generate::{generate_dataset, generate_multiple, generate_single, COVARIATES};
pub use run::{
    replicate_data_seed, replicate_detection_config, run_cell, run_grid, run_replicates, ReplicateRecord,
    SimulationMetrics, SimulationReport, MAX_FAILURE_FRACTION, SIMULATION_FORMAT_VERSION,
};
pub use scenario::{Grid, SimulationScenario, SIMULATION_MC_SAMPLES};
pub use tables::{format_tables, metrics_csv};
