//! The JSON run report and its pass/fail checks.

use std::collections::BTreeMap;

use adp_lqr::stacks::RankReport;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, MatrixSpec};

/// Name of the wall-clock check.
pub const RUNTIME_CHECK: &str = "runtime_seconds";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// `value <= bound`, with NaN failing.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound, format!("{value:.6e} <= {bound:.3e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub condition: String,
    pub matrix: String,
    pub required: usize,
    pub achieved: usize,
    pub satisfied: bool,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub tol: f64,
    pub entries: Vec<RankRow>,
}

impl From<&RankReport> for RankSummary {
    fn from(r: &RankReport) -> Self {
        Self {
            tol: r.tol,
            entries: r
                .entries
                .iter()
                .map(|e| RankRow {
                    condition: e.condition.name().to_string(),
                    matrix: e.condition.matrix_label().to_string(),
                    required: e.required,
                    achieved: e.achieved,
                    satisfied: e.satisfied,
                    singular_values: e.singular_values.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub t0: f64,
    pub spacing: f64,
    pub configured_intervals: usize,
    pub used_intervals: usize,
}

/// Model-based reference values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleSummary {
    pub p: Option<MatrixSpec>,
    pub k: Option<MatrixSpec>,
    pub are_residual: Option<f64>,
    pub l: Option<MatrixSpec>,
    pub m: Option<MatrixSpec>,
    /// `M' P* M`
    pub p_zeta: Option<MatrixSpec>,
    /// `K* M`
    pub k_zeta: Option<MatrixSpec>,
    /// Residual of `M' P* M` in the ancillary Riccati equation.
    pub ancillary_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub algorithm: String,
    pub unknowns: Option<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub resets: usize,
    pub final_value_error: Option<f64>,
    pub final_gain_error: Option<f64>,
    pub final_p: MatrixSpec,
    pub final_gain: MatrixSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Completed,
    RankDeficient,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub name: String,
    pub config: ExperimentConfig,
    pub status: Status,
    pub error: Option<String>,
    pub window: Option<WindowSummary>,
    pub rank: Option<RankSummary>,
    pub oracle: Option<OracleSummary>,
    pub iteration: Option<IterationSummary>,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// Seconds per phase.
    pub timings: BTreeMap<String, f64>,
    /// Files written next to the report, relative to its directory.
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            name: config.name.clone(),
            config: config.clone(),
            status: Status::Completed,
            error: None,
            window: None,
            rank: None,
            oracle: None,
            iteration: None,
            warnings: Vec::new(),
            checks: Vec::new(),
            passed: false,
            timings: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    /// Every failure is recorded as a check, so passing means all checks
    /// passed and at least one was requested.
    pub fn finish(&mut self) {
        self.passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
    }

    /// The report with wall-clock timings removed, for reproducibility
    /// comparisons. The runtime check keeps its verdict but loses its detail.
    pub fn without_timings(&self) -> Self {
        let mut copy = self.clone();
        copy.timings.clear();
        for c in copy.checks.iter_mut().filter(|c| c.name == RUNTIME_CHECK) {
            c.detail.clear();
        }
        copy
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `metric,value` rows for every scalar in the report.
    pub fn summary_rows(&self) -> Vec<(String, f64)> {
        let mut rows = Vec::new();
        if let Some(w) = &self.window {
            rows.push(("window_intervals".to_string(), w.used_intervals as f64));
        }
        if let Some(rank) = &self.rank {
            for e in &rank.entries {
                rows.push((format!("rank_{}", e.condition), e.achieved as f64));
                rows.push((format!("rank_required_{}", e.condition), e.required as f64));
            }
        }
        if let Some(o) = &self.oracle {
            if let Some(v) = o.are_residual {
                rows.push(("oracle_are_residual".to_string(), v));
            }
            if let Some(v) = o.ancillary_residual {
                rows.push(("ancillary_are_residual".to_string(), v));
            }
        }
        if let Some(it) = &self.iteration {
            rows.push(("iterations".to_string(), it.iterations as f64));
            rows.push(("converged".to_string(), f64::from(u8::from(it.converged))));
            rows.push(("resets".to_string(), it.resets as f64));
            if let Some(v) = it.final_value_error {
                rows.push(("final_value_error".to_string(), v));
            }
            if let Some(v) = it.final_gain_error {
                rows.push(("final_gain_error".to_string(), v));
            }
        }
        for (phase, secs) in &self.timings {
            rows.push((format!("seconds_{phase}"), *secs));
        }
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_never_passes_a_bound() {
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
        assert!(Check::at_most("x", 1.0, 1.0).passed);
    }
}
