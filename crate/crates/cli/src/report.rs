//! Artifacts written by the commands.
//!
//! Floats in CSV use `{:.16e}` (17 significant digits) so that reruns with
//! different thread counts are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wdro::approx::{LagrangianCheck, RadiusComparison, SweepReport};
use wdro::entropic::DualityCertificate;
use wdro::ot::OtSummary;

use crate::{CliError, Result};

pub const SWEEP_HEADER: &str = "eps,delta,lambda_star,lambda_bar,value_entropic,value_unreg,gap,eta";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveReport {
    pub method: String,
    pub eps: f64,
    pub delta: f64,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub phi: Option<String>,
    pub rho: f64,
    pub points: usize,
    pub value: f64,
    pub lambda_star: f64,
    pub lambda_bound: f64,
    #[serde(default)]
    pub gap: Option<f64>,
    #[serde(default)]
    pub inner_residual: Option<f64>,
    #[serde(default)]
    pub feasibility_slack: Option<f64>,
    #[serde(default)]
    pub complementarity: Option<f64>,
    pub evaluations: usize,
    pub inner_argmax: Vec<usize>,
}

impl SolveReport {
    /// Structural checks used after a JSON round trip.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(CliError::Diagnostics(format!("solution: {what}")));
        if !self.value.is_finite() {
            return bad("value is not finite");
        }
        if !(self.lambda_star >= 0.0 && self.lambda_star <= self.lambda_bound + 1e-9) {
            return bad("lambda_star outside [0, lambda_bound]");
        }
        if !(self.rho > 0.0) || self.eps < 0.0 || self.delta < 0.0 {
            return bad("parameters out of range");
        }
        if self.inner_argmax.len() != self.points || self.inner_argmax.iter().any(|&j| j >= self.points) {
            return bad("inner_argmax does not index the grid");
        }
        for v in [self.gap, self.inner_residual, self.feasibility_slack, self.complementarity].into_iter().flatten() {
            if !v.is_finite() {
                return bad("non-finite diagnostic");
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let gap = self.gap.map_or_else(|| "n/a".to_string(), |g| format!("{g:.3e}"));
        format!(
            "method={} value={:.10} lambda_star={:.8} gap={}",
            self.method, self.value, self.lambda_star, gap
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusRow {
    pub delta_over_sigma: f64,
    pub delta: f64,
    #[serde(flatten)]
    pub comparison: RadiusComparison,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub eps: f64,
    pub delta: f64,
    pub sigma: f64,
    pub lambda_bar: f64,
    pub lagrangian: Vec<LagrangianCheck>,
    pub radius: Vec<RadiusRow>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub dual_value: f64,
    pub lambda_star: f64,
    /// Linear-programming primal; absent above the atom cap.
    pub primal_lp_value: Option<f64>,
    pub lp_gap: Option<f64>,
    /// Exact transport cost from `P` to the worst-case marginal; at most `rho`.
    pub worst_case_transport: Option<f64>,
    pub sinkhorn_eps: f64,
    pub sinkhorn: Option<OtSummary>,
    pub entropic: Option<DualityCertificate>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Diagnostics(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::with_capacity(64 * (report.rows.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in &report.rows {
        let cols = [r.eps, r.delta, r.lambda_star, r.lambda_bar, r.value_entropic, r.value_unreg, r.gap, r.eta];
        for (k, v) in cols.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Writes `sweep.csv` and `sweep.json` into `dir`.
pub fn emit_report(report: &SweepReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv = dir.join("sweep.csv");
    std::fs::write(&csv, sweep_csv(report)).map_err(io_err(&csv))?;
    write_json(&dir.join("sweep.json"), report)
}
