//! Command-line front end.
//!
//! Subcommands: `detect`, `simulate`, `critical-values`, `plot-effects`.
//! Values from a configuration file are overridden by flags. Every run writes
//! `manifest.json` into the output directory. Failures print one line,
//! `error[<class>]: <message>`, and exit with 2 (input), 3 (numerical) or 4
//! (configuration).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{build_design, load_dataset_from_path, SchemaConfig};
use crate::detect::{
    assemble_result, critical_distributions, statistic_chain, DetectionConfig, DetectionReport, DetectionResult, Trim,
};
use crate::error::{Error, Result};
use crate::fit_report::FitReport;
use crate::gee::{fit_gee, CorrelationKind, GeeOptions};
use crate::mvn::MaxAbsDistribution;
use crate::plot::EffectsPlot;
use crate::sim::{format_tables, metrics_csv, run_grid, Grid, SimulationScenario};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "evaluator-outliers", version, about = "Detect outlier evaluators from clustered measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the GEE model to a dataset and run stepwise outlier detection.
    Detect(DetectArgs),
    /// Run a simulation scenario, or a grid of scenarios with --grid.
    Simulate(SimulateArgs),
    /// Tabulate Monte Carlo critical values.
    CriticalValues(CriticalValuesArgs),
    /// Plot estimated evaluator effects with detected outliers marked.
    PlotEffects(PlotArgs),
}

/// Flags shared by the commands that run detection.
#[derive(Debug, Clone, Default, Args)]
pub struct DetectionFlags {
    /// Significance levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long)]
    pub max_outliers: Option<usize>,
    /// `count:<g>` or `fraction:<δ>`.
    #[arg(long)]
    pub trim: Option<String>,
    /// model or sandwich.
    #[arg(long)]
    pub variance: Option<String>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl DetectionFlags {
    fn apply(&self, config: &mut DetectionConfig) -> Result<()> {
        if let Some(&alpha) = self.alpha.first() {
            config.alpha = alpha;
        }
        if let Some(k) = self.max_outliers {
            config.max_outliers = k;
        }
        if let Some(t) = &self.trim {
            config.trim = Some(t.parse()?);
        }
        if let Some(v) = &self.variance {
            config.variance = v.parse()?;
        }
        if let Some(n) = self.mc_samples {
            config.mc_samples = n;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        Ok(())
    }

    fn alphas(&self, config: &DetectionConfig) -> Vec<f64> {
        if self.alpha.is_empty() {
            vec![config.alpha]
        } else {
            self.alpha.clone()
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Delimited data file.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema (TOML) naming the columns and layout.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Detection settings (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// independent, exchangeable or unstructured; defaults to exchangeable
    /// when any participant has several outcomes.
    #[arg(long)]
    pub correlation: Option<String>,
    #[command(flatten)]
    pub detection: DetectionFlags,
    /// Also write effects.svg and effects.csv.
    #[arg(long)]
    pub plot: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Cross the scenario's [grid] axes.
    #[arg(long)]
    pub grid: bool,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub correlation: Option<String>,
    #[command(flatten)]
    pub detection: DetectionFlags,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CriticalValuesArgs {
    /// Fit report (fit.json) whose effects and covariance define the steps.
    #[arg(long, conflicts_with = "dims", required_unless_present = "dims")]
    pub fit: Option<PathBuf>,
    /// Identity covariances of these dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub detection: DetectionFlags,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Fit report (fit.json).
    #[arg(long)]
    pub fit: PathBuf,
    /// Detection reports, one per α; repeatable.
    #[arg(long)]
    pub detection: Vec<PathBuf>,
    /// Trim for the reference line; defaults to the first report's trim.
    #[arg(long)]
    pub trim: Option<String>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

/// Record of one invocation, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub config: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub outputs: Vec<String>,
}

struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, manifest: RunManifest) -> Result<()> {
        let manifest = RunManifest {
            outputs: std::mem::take(&mut self.written),
            ..manifest
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // A pool may already exist when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Input(format!("cannot read `{}`", path.display())))
    }
}

fn load_detection_config(path: Option<&Path>) -> Result<DetectionConfig> {
    match path {
        None => Ok(DetectionConfig::default()),
        Some(p) => {
            require_file(p)?;
            toml::from_str(&fs::read_to_string(p)?)
                .map_err(|e| Error::Config(format!("{}: {}", p.display(), e.message())))
        }
    }
}

fn alpha_tag(alpha: f64) -> String {
    format!("alpha-{alpha}")
}

/// Runs detection at several α on one set of effects. The statistic chain
/// and the Monte Carlo draws are shared; each result equals a separate
/// `detect_outliers` call at that α.
pub fn detect_at_alphas(
    beta_hat: &[f64],
    omega: &DMatrix<f64>,
    labels: &[String],
    config: &DetectionConfig,
    alphas: &[f64],
) -> Result<Vec<DetectionResult>> {
    for &alpha in alphas {
        DetectionConfig { alpha, ..config.clone() }.validate(beta_hat.len())?;
    }
    let chain = statistic_chain(beta_hat, omega, labels, config)?;
    let dists = critical_distributions(omega, &chain, config.mc_samples, config.seed)?;
    Ok(alphas
        .iter()
        .map(|&alpha| {
            let lambdas: Vec<f64> = dists.iter().map(|d| d.quantile(alpha).powi(2)).collect();
            assemble_result(&chain, &lambdas, beta_hat, labels, &DetectionConfig { alpha, ..config.clone() })
        })
        .collect())
}

fn selected_table(results: &[DetectionResult]) -> String {
    let mut out = format!("{:<8}  {}\n", "alpha", "detected evaluators");
    for r in results {
        let detected = if r.detected.is_empty() {
            "none".to_string()
        } else {
            r.detected.join(", ")
        };
        out.push_str(&format!("{:<8}  {}\n", r.config.alpha, detected));
    }
    out
}

pub fn cmd_detect(args: &DetectArgs) -> Result<()> {
    set_threads(args.threads)?;
    require_file(&args.data)?;
    let schema = match &args.schema {
        Some(p) => {
            require_file(p)?;
            SchemaConfig::from_path(p)?
        }
        None => SchemaConfig::default(),
    };
    let mut config = load_detection_config(args.config.as_deref())?;
    args.detection.apply(&mut config)?;
    let alphas = args.detection.alphas(&config);

    let dataset = load_dataset_from_path(&args.data, &schema)?;
    let design = build_design(&dataset)?;
    let correlation = match &args.correlation {
        Some(c) => c.parse()?,
        None if design.max_cluster_size() > 1 => CorrelationKind::Exchangeable,
        None => CorrelationKind::Independent,
    };
    let fit = fit_gee(&design, correlation, &GeeOptions::default())?;
    let fit_report = FitReport::from(&fit);
    let results = detect_at_alphas(
        fit.beta_hat.as_slice(),
        fit.omega(config.variance),
        &fit.evaluator_labels,
        &config,
        &alphas,
    )?;

    let mut out = Output::new(&args.output_dir)?;
    out.write("fit.json", &fit_report.to_json())?;
    out.write("fit.csv", &fit_report.to_csv())?;
    let mut text = String::new();
    for result in &results {
        let report = DetectionReport::new(result.clone(), Some(correlation));
        let tag = alpha_tag(result.config.alpha);
        out.write(&format!("detection-{tag}.json"), &report.to_json())?;
        text.push_str(&report.to_table());
        text.push('\n');
    }
    text.push_str(&selected_table(&results));
    out.write("detection.txt", &text)?;
    if args.plot {
        let plot = EffectsPlot::new(&fit.evaluator_labels, &fit_report.beta_hat, config.trim(), &results)?;
        out.write("effects.svg", &plot.to_svg())?;
        out.write("effects.csv", &plot.to_csv())?;
    }
    print!("{text}");
    let mut inputs = vec![args.data.clone()];
    inputs.extend(args.schema.clone());
    out.finish(RunManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        command: "detect".into(),
        inputs,
        config: args.config.clone(),
        output_dir: args.output_dir.clone(),
        seed: Some(config.seed),
        threads: args.threads,
        outputs: vec![],
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    set_threads(args.threads)?;
    let mut scenario = match &args.scenario {
        Some(p) => {
            require_file(p)?;
            SimulationScenario::from_path(p)?
        }
        None => SimulationScenario::default(),
    };
    args.detection.apply(&mut scenario.detection)?;
    if let Some(s) = args.detection.seed {
        scenario.seed = s;
    }
    if let Some(r) = args.replicates {
        scenario.replicates = r;
    }
    if let Some(c) = &args.correlation {
        scenario.correlation = Some(c.parse()?);
    }
    if !args.grid {
        scenario.grid = None;
    }
    let flag_variance = args.detection.variance.is_some();
    if args.detection.alpha.len() > 1 || (args.grid && (!args.detection.alpha.is_empty() || flag_variance)) {
        let mut grid = scenario.grid.take().unwrap_or_default();
        if !args.detection.alpha.is_empty() {
            grid.alpha = args.detection.alpha.clone();
        }
        if flag_variance {
            grid.variance = vec![scenario.detection.variance];
        }
        scenario.grid = Some(grid);
    }
    if args.grid && scenario.grid.as_ref().is_none_or(|g| *g == Grid::default()) {
        return Err(Error::Config("--grid needs a [grid] table in the scenario".into()));
    }
    scenario.validate()?;

    let report = run_grid(&scenario)?;
    let tables = format_tables(&report);
    let mut out = Output::new(&args.output_dir)?;
    out.write("simulation.json", &report.to_json())?;
    out.write("simulation.csv", &metrics_csv(&report.cells))?;
    out.write("tables.txt", &tables)?;
    for cell in &report.cells {
        for w in &cell.warnings {
            eprintln!("warning: {w}");
        }
    }
    print!("{tables}");
    out.finish(RunManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        command: "simulate".into(),
        inputs: vec![],
        config: args.scenario.clone(),
        output_dir: args.output_dir.clone(),
        seed: Some(scenario.seed),
        threads: args.threads,
        outputs: vec![],
    })
}

pub fn cmd_critical_values(args: &CriticalValuesArgs) -> Result<()> {
    set_threads(args.threads)?;
    let mut config = load_detection_config(args.config.as_deref())?;
    args.detection.apply(&mut config)?;
    let alphas = args.detection.alphas(&config);
    for &alpha in &alphas {
        crate::mvn::check_alpha(alpha)?;
    }
    let mut csv = String::new();
    let mut inputs = Vec::new();
    if let Some(path) = &args.fit {
        require_file(path)?;
        inputs.push(path.clone());
        let fit = FitReport::from_json(&fs::read_to_string(path)?)?;
        let omega = fit.omega(config.variance);
        let results = detect_at_alphas(&fit.beta_hat, &omega, &fit.evaluator_labels, &config, &alphas)?;
        csv.push_str("step,candidates,alpha,critical_value,sqrt_critical_value\n");
        for r in &results {
            for s in &r.steps {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.step,
                    s.candidates.len(),
                    r.config.alpha,
                    s.critical_value,
                    s.critical_value.sqrt()
                ));
            }
        }
    } else {
        csv.push_str("dimension,alpha,critical_value,sqrt_critical_value\n");
        for &d in &args.dims {
            if d == 0 {
                return Err(Error::Input("dimension must be positive".into()));
            }
            let dist = MaxAbsDistribution::sample(&DMatrix::identity(d, d), config.mc_samples, config.seed)?;
            for &alpha in &alphas {
                let c = dist.quantile(alpha);
                csv.push_str(&format!("{d},{alpha},{},{c}\n", c * c));
            }
        }
    }
    let mut out = Output::new(&args.output_dir)?;
    out.write("critical_values.csv", &csv)?;
    print!("{csv}");
    out.finish(RunManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        command: "critical-values".into(),
        inputs,
        config: args.config.clone(),
        output_dir: args.output_dir.clone(),
        seed: Some(config.seed),
        threads: args.threads,
        outputs: vec![],
    })
}

pub fn cmd_plot_effects(args: &PlotArgs) -> Result<()> {
    require_file(&args.fit)?;
    let fit = FitReport::from_json(&fs::read_to_string(&args.fit)?)?;
    let mut runs = Vec::new();
    for path in &args.detection {
        require_file(path)?;
        runs.push(DetectionReport::from_json(&fs::read_to_string(path)?)?.result);
    }
    let trim: Trim = match &args.trim {
        Some(t) => t.parse()?,
        None => runs.first().map_or(Trim::Count(0), |r| r.config.trim()),
    };
    let plot = EffectsPlot::new(&fit.evaluator_labels, &fit.beta_hat, trim, &runs)?;
    let mut out = Output::new(&args.output_dir)?;
    out.write("effects.svg", &plot.to_svg())?;
    out.write("effects.csv", &plot.to_csv())?;
    let mut inputs = vec![args.fit.clone()];
    inputs.extend(args.detection.iter().cloned());
    out.finish(RunManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        command: "plot-effects".into(),
        inputs,
        config: None,
        output_dir: args.output_dir.clone(),
        seed: None,
        threads: None,
        outputs: vec![],
    })
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::CriticalValues(a) => cmd_critical_values(a),
        Command::PlotEffects(a) => cmd_plot_effects(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let class = e.class();
            eprintln!("error[{class}]: {}", e.to_string().replace('\n', " "));
            class.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gee::VarianceChoice;

    #[test]
    fn flags_override_config() {
        let mut config = DetectionConfig::default();
        let flags = DetectionFlags {
            alpha: vec![0.1, 0.3],
            trim: Some("fraction:0.1".into()),
            variance: Some("sandwich".into()),
            ..Default::default()
        };
        flags.apply(&mut config).unwrap();
        assert_eq!(config.alpha, 0.1);
        assert_eq!(config.trim, Some(Trim::Fraction(0.1)));
        assert_eq!(config.variance, VarianceChoice::Sandwich);
        assert_eq!(flags.alphas(&config), vec![0.1, 0.3]);
    }

    #[test]
    fn unknown_flag_is_a_configuration_error() {
        assert_eq!(main_with_args(["evaluator-outliers", "detect", "--bogus"]), 4);
    }

    #[test]
    fn bad_variance_name() {
        let mut config = DetectionConfig::default();
        let flags = DetectionFlags {
            variance: Some("huber".into()),
            ..Default::default()
        };
        assert!(matches!(flags.apply(&mut config), Err(Error::Config(_))));
    }
}
