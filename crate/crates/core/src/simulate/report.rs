//! Study summaries: CSV serialization (full precision, exact round-trip)
//! and aligned text tables in the usual bias/SE/RMSE/coverage layout.

use super::GenConfig;
use crate::error::{Error, Result};

/// Metrics for one target under one method.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSummary {
    pub target: String,
    pub truth: f64,
    pub bias: f64,
    /// Monte Carlo standard deviation of the estimates.
    pub se: f64,
    pub rmse: f64,
    /// Fraction of repetitions whose 95% CI covered the truth; None when the
    /// method produced no interval.
    pub coverage: Option<f64>,
    pub n_used: usize,
}

/// All target metrics for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub targets: Vec<TargetSummary>,
}

/// Full study output.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub config: GenConfig,
    pub n_reps: usize,
    pub n_failed: usize,
    pub methods: Vec<MethodSummary>,
    pub wall_seconds: f64,
}

/// One flattened CSV row, used for exact round-trip comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvCell {
    pub method: String,
    pub target: String,
    pub truth: f64,
    pub bias: f64,
    pub se: f64,
    pub rmse: f64,
    pub coverage: Option<f64>,
    pub n_used: usize,
}

const CSV_HEADER: &str = "method,target,truth,bias,se,rmse,coverage,n_used";

impl StudyReport {
    pub fn cells(&self) -> Vec<CsvCell> {
        self.methods
            .iter()
            .flat_map(|m| {
                m.targets.iter().map(|t| CsvCell {
                    method: m.method.clone(),
                    target: t.target.clone(),
                    truth: t.truth,
                    bias: t.bias,
                    se: t.se,
                    rmse: t.rmse,
                    coverage: t.coverage,
                    n_used: t.n_used,
                })
            })
            .collect()
    }

    /// Metric lookup: (method, target) -> summary.
    pub fn cell(&self, method: &str, target: &str) -> Option<&TargetSummary> {
        self.methods
            .iter()
            .find(|m| m.method == method)?
            .targets
            .iter()
            .find(|t| t.target == target)
    }

    /// Data rows only (no metadata), f64 cells at full precision.
    pub fn to_csv_body(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in self.cells() {
            let coverage = c.coverage.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.method, c.target, c.truth, c.bias, c.se, c.rmse, coverage, c.n_used
            ));
        }
        out
    }

    /// CSV with a commented metadata header.
    pub fn to_csv(&self) -> String {
        let g = &self.config;
        let mut out = String::new();
        out.push_str(&format!("# setting={}\n", g.setting.name()));
        out.push_str(&format!("# model={}\n", g.model.name()));
        out.push_str(&format!(
            "# nsr={} j={} n={} seed={}\n",
            g.nsr, g.j, g.n, g.seed
        ));
        out.push_str(&format!(
            "# mu_lambda_x={} sigma2_lambda_x={} beta0={} beta1={} noise_sd={}\n",
            g.mu_lambda_x, g.sigma2_lambda_x, g.beta0, g.beta1, g.noise_sd
        ));
        out.push_str(&format!(
            "# n_reps={} n_failed={} wall_seconds={}\n",
            self.n_reps, self.n_failed, self.wall_seconds
        ));
        out.push_str(&self.to_csv_body());
        out
    }

    /// Aligned text table: one row per target, bias/SE/RMSE/CR per method.
    pub fn render_table(&self) -> String {
        let g = &self.config;
        let mut out = format!(
            "{} model, {} X, NSR={}, J={}, n={}, {} repetitions ({} failed)\n",
            g.model.name(),
            g.setting.name(),
            g.nsr,
            g.j,
            g.n,
            self.n_reps,
            self.n_failed
        );
        let mut header = format!("{:<18}", "target");
        for m in &self.methods {
            header.push_str(&format!(
                "{:>10} {:>8} {:>8} {:>6}",
                format!("{}:bias", m.method),
                "se",
                "rmse",
                "cr"
            ));
            header.push_str("  ");
        }
        out.push_str(header.trim_end());
        out.push('\n');
        let n_targets = self.methods.first().map_or(0, |m| m.targets.len());
        for ti in 0..n_targets {
            let mut line = format!("{:<18}", self.methods[0].targets[ti].target);
            for m in &self.methods {
                let t = &m.targets[ti];
                let cr = t.coverage.map(|c| format!("{c:.3}")).unwrap_or_else(|| "-".into());
                line.push_str(&format!(
                    "{:>10.4} {:>8.4} {:>8.4} {:>6}",
                    t.bias, t.se, t.rmse, cr
                ));
                line.push_str("  ");
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Parses rows written by [`StudyReport::to_csv`] (metadata lines skipped).
pub fn parse_report_csv(text: &str) -> Result<Vec<CsvCell>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == CSV_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::invalid(format!(
                "expected 8 fields, got {} in line '{line}'",
                fields.len()
            )));
        }
        let parse = |s: &str, name: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad {name} value '{s}'")))
        };
        rows.push(CsvCell {
            method: fields[0].to_string(),
            target: fields[1].to_string(),
            truth: parse(fields[2], "truth")?,
            bias: parse(fields[3], "bias")?,
            se: parse(fields[4], "se")?,
            rmse: parse(fields[5], "rmse")?,
            coverage: if fields[6].is_empty() { None } else { Some(parse(fields[6], "coverage")?) },
            n_used: fields[7]
                .parse()
                .map_err(|_| Error::invalid(format!("bad n_used value '{}'", fields[7])))?,
        });
    }
    Ok(rows)
}
