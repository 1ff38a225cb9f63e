//! Estimated evaluator effects as an SVG scatter, with the truncated mean as
//! a horizontal line and detected outliers marked by the smallest α at which
//! they were detected.
//!
//! Element classes: one `effect` circle per evaluator, one `truncated-mean`
//! line, one `outlier` mark per detected evaluator. The same numbers are
//! available as a delimited table from [`EffectsPlot::to_csv`].

use std::fmt::Write as _;

use crate::detect::{truncated_mean, DetectionResult, Trim};
use crate::error::{Error, Result};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EffectsPlot {
    pub labels: Vec<String>,
    pub beta_hat: Vec<f64>,
    pub truncated_mean: f64,
    /// Distinct α values of the detection runs, ascending.
    pub alphas: Vec<f64>,
    /// Smallest α at which each evaluator was detected.
    pub first_alpha: Vec<Option<f64>>,
}

impl EffectsPlot {
    /// `runs` are detection results on the same effects, typically at
    /// several α. The line uses `trim` over all effects.
    pub fn new(labels: &[String], beta_hat: &[f64], trim: Trim, runs: &[DetectionResult]) -> Result<Self> {
        if labels.len() != beta_hat.len() {
            return Err(Error::Input(format!("{} labels for {} effects", labels.len(), beta_hat.len())));
        }
        for run in runs {
            if run.evaluator_labels != labels {
                return Err(Error::Input(
                    "detection report evaluator labels do not match the fit report".into(),
                ));
            }
        }
        let mut alphas: Vec<f64> = runs.iter().map(|r| r.config.alpha).collect();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        let first_alpha = labels
            .iter()
            .map(|l| {
                runs.iter()
                    .filter(|r| r.is_detected(l))
                    .map(|r| r.config.alpha)
                    .min_by(f64::total_cmp)
            })
            .collect();
        Ok(EffectsPlot {
            labels: labels.to_vec(),
            beta_hat: beta_hat.to_vec(),
            truncated_mean: truncated_mean(beta_hat, trim)?,
            alphas,
            first_alpha,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("evaluator,beta_hat,truncated_mean,first_alpha\n");
        for (i, label) in self.labels.iter().enumerate() {
            let alpha = self.first_alpha[i].map_or(String::new(), |a| a.to_string());
            let _ = writeln!(out, "{},{},{},{}", label, self.beta_hat[i], self.truncated_mean, alpha);
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let n = self.beta_hat.len().max(1);
        let lo = self.beta_hat.iter().copied().fold(self.truncated_mean, f64::min);
        let hi = self.beta_hat.iter().copied().fold(self.truncated_mean, f64::max);
        let pad = ((hi - lo) * 0.08).max(1e-9);
        let (lo, hi) = (lo - pad, hi + pad);
        let x = |i: usize| MARGIN + (i as f64 + 0.5) * (WIDTH - 2.0 * MARGIN) / n as f64;
        let y = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let (left, right, bottom) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            svg,
            r#"<path d="M{left} {MARGIN} V{bottom} H{right}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let v = lo + (hi - lo) * k as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
                left - 6.0,
                y(v) + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text transform="rotate(-90)" x="{}" y="16" text-anchor="middle">estimated effect</text>"#,
            -HEIGHT / 2.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">evaluator</text>"#,
            WIDTH / 2.0,
            HEIGHT - 14.0
        );
        for (i, label) in self.labels.iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="8">{}</text>"#,
                x(i),
                bottom + 14.0,
                escape(label)
            );
        }
        let _ = writeln!(
            svg,
            r#"<line class="truncated-mean" x1="{left}" x2="{right}" y1="{0:.2}" y2="{0:.2}" stroke="gray" stroke-dasharray="6 4"/>"#,
            y(self.truncated_mean)
        );
        for (i, &b) in self.beta_hat.iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"<circle class="effect" cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"><title>{}: {b}</title></circle>"#,
                x(i),
                y(b),
                escape(&self.labels[i])
            );
        }
        for (i, alpha) in self.first_alpha.iter().enumerate() {
            if let Some(a) = alpha {
                let rank = self.alphas.iter().position(|v| v == a).unwrap_or(0);
                let _ = writeln!(
                    svg,
                    r#"<path class="outlier" data-alpha="{a}" d="{}" fill="none" stroke="firebrick" stroke-width="1.5"/>"#,
                    marker(rank, x(i), y(self.beta_hat[i]) - 10.0)
                );
            }
        }
        for (rank, a) in self.alphas.iter().enumerate() {
            let ly = MARGIN + 14.0 * rank as f64;
            let _ = writeln!(
                svg,
                r#"<path d="{}" fill="none" stroke="firebrick" stroke-width="1.5"/><text x="{}" y="{:.1}">first detected at alpha = {a}</text>"#,
                marker(rank, right - 150.0, ly),
                right - 140.0,
                ly + 4.0
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Triangle for the smallest α, then plus, cross, diamond, square.
fn marker(rank: usize, cx: f64, cy: f64) -> String {
    let s = 5.0;
    match rank % 5 {
        0 => format!("M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} Z", cx, cy - s, cx - s, cy + s, cx + s, cy + s),
        1 => format!("M{:.2} {:.2} H{:.2} M{:.2} {:.2} V{:.2}", cx - s, cy, cx + s, cx, cy - s, cy + s),
        2 => format!(
            "M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}",
            cx - s,
            cy - s,
            cx + s,
            cy + s,
            cx - s,
            cy + s,
            cx + s,
            cy - s
        ),
        3 => format!("M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} Z", cx, cy - s, cx + s, cy, cx, cy + s, cx - s, cy),
        _ => format!("M{:.2} {:.2} h{} v{} h-{} Z", cx - s, cy - s, 2.0 * s, 2.0 * s, 2.0 * s),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
