use std::fmt::Write as _;

use super::{SimulationMetrics, SimulationReport};
use crate::gee::VarianceChoice;

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn rate(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

/// Rate tables with σ across the columns and one row per (ρ, α), one block
/// per variance choice. Null scenarios show the type I error rate; outlier
/// scenarios show TPR and TNR side by side.
pub fn format_tables(report: &SimulationReport) -> String {
    let cells = &report.cells;
    let sigmas = distinct(cells.iter().map(|c| c.sigma));
    let rhos = distinct(cells.iter().map(|c| c.rho));
    let alphas = distinct(cells.iter().map(|c| c.alpha));
    let mut variances: Vec<VarianceChoice> = Vec::new();
    for c in cells {
        if !variances.contains(&c.variance) {
            variances.push(c.variance);
        }
    }
    let show_rho = report.scenario.outcome_arity > 1;
    let null = report.scenario.n_outliers() == 0;

    let mut out = String::new();
    for variance in variances {
        let _ = writeln!(out, "{} variance", if variance == VarianceChoice::Model { "Model-based" } else { "Sandwich" });
        let mut header = format!("{:<20}", "sigma");
        let blocks: &[&str] = if null { &["type I"] } else { &["TPR", "TNR"] };
        for _ in blocks {
            for s in &sigmas {
                let _ = write!(header, "{:>8}", s);
            }
        }
        let mut over = format!("{:<20}", "");
        for b in blocks {
            let _ = write!(over, "{:<width$}", format!("  {b}"), width = 8 * sigmas.len());
        }
        let _ = writeln!(out, "{}", over.trim_end());
        let _ = writeln!(out, "{header}");
        for &rho in if show_rho { &rhos[..] } else { &rhos[..1] } {
            for &alpha in &alphas {
                let label = if show_rho {
                    format!("rho={rho} alpha={alpha}")
                } else {
                    format!("alpha={alpha}")
                };
                let mut line = format!("{label:<20}");
                let find = |sigma: f64| -> Option<&SimulationMetrics> {
                    cells
                        .iter()
                        .find(|c| c.sigma == sigma && c.rho == rho && c.alpha == alpha && c.variance == variance)
                };
                if null {
                    for &s in &sigmas {
                        let _ = write!(line, "{:>8}", rate(find(s).and_then(|c| c.type_i_rate)));
                    }
                } else {
                    for &s in &sigmas {
                        let _ = write!(line, "{:>8}", rate(find(s).and_then(|c| c.tpr)));
                    }
                    for &s in &sigmas {
                        let _ = write!(line, "{:>8}", rate(find(s).map(|c| c.tnr)));
                    }
                }
                let _ = writeln!(out, "{line}");
            }
        }
        let _ = writeln!(out);
    }
    out
}

/// One delimited row per cell.
pub fn metrics_csv(cells: &[SimulationMetrics]) -> String {
    let mut out = String::from(
        "sigma,rho,alpha,variance,replicates,completed,failures,type_i_rate,type_i_se,tpr,tpr_se,tnr,tnr_se,mean_detected\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.sigma,
            c.rho,
            c.alpha,
            c.variance,
            c.replicates,
            c.completed,
            c.failures,
            opt(c.type_i_rate),
            opt(c.type_i_se),
            opt(c.tpr),
            opt(c.tpr_se),
            c.tnr,
            c.tnr_se,
            c.mean_detected
        );
    }
    out
}
