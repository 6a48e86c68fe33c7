//! JSON run reports. A report embeds the fully resolved configuration, the
//! per-iteration series, the stopping reason, and named scalar metrics.
//! Everything except the timing block is deterministic under a fixed seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::FitReport;

/// Wall-clock measurements, excluded from determinism guarantees.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Timings {
    pub total_seconds: f64,
    pub per_iteration_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    /// Fully resolved configuration of the run that produced this report.
    pub config: serde_json::Value,
    pub cost_history: Vec<f64>,
    pub step_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub timings: Timings,
    /// Stopping reason for fits, or a command-specific label such as
    /// "completed" for runs that do not iterate.
    pub termination: String,
    pub metrics: BTreeMap<String, f64>,
}

impl RunReport {
    /// Builds a report from a fit, leaving `metrics` for the caller to fill.
    pub fn from_fit(config: serde_json::Value, fit: &FitReport) -> Self {
        let total: f64 = fit.iterations.iter().map(|r| r.elapsed_seconds).sum();
        let per_iter = if fit.iterations.is_empty() {
            0.0
        } else {
            total / fit.iterations.len() as f64
        };
        RunReport {
            config,
            cost_history: fit.cost_history(),
            step_history: fit.step_history(),
            grad_norm_history: fit.grad_norm_history(),
            timings: Timings {
                total_seconds: total,
                per_iteration_seconds: per_iter,
            },
            termination: fit.termination.label().to_string(),
            metrics: BTreeMap::new(),
        }
    }

    /// Copy with zeroed timings, for byte-level determinism comparisons.
    pub fn without_timings(&self) -> RunReport {
        RunReport {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

pub fn save_report(path: impl AsRef<Path>, report: &RunReport) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::data(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<RunReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("{}: cannot parse report: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{IterationRecord, Termination};

    fn fit() -> FitReport {
        FitReport {
            termination: Termination::RelCostTol,
            initial_cost: 2.0,
            final_cost: 0.25,
            iterations: vec![
                IterationRecord {
                    cost: 1.0,
                    step: 0.5,
                    grad_norm: 3.0,
                    halvings: 2,
                    elapsed_seconds: 0.25,
                },
                IterationRecord {
                    cost: 0.25,
                    step: 0.25,
                    grad_norm: 1.0,
                    halvings: 0,
                    elapsed_seconds: 0.35,
                },
            ],
        }
    }

    #[test]
    fn report_round_trips_through_json() {
        let mut report = RunReport::from_fit(serde_json::json!({"seed": 7}), &fit());
        report.metrics.insert("test_cost".to_string(), 0.3);
        let f = tempfile::NamedTempFile::new().unwrap();
        save_report(f.path(), &report).unwrap();
        let back = load_report(f.path()).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.cost_history, vec![1.0, 0.25]);
        assert_eq!(back.termination, "rel-cost-tol");
        assert_eq!(back.config["seed"], 7);
    }

    #[test]
    fn reports_differing_only_in_timings_agree_after_stripping() {
        let a = RunReport::from_fit(serde_json::json!({"seed": 7}), &fit());
        let mut b = a.clone();
        b.timings.total_seconds = 99.0;
        assert_ne!(a, b);
        let sa = serde_json::to_string(&a.without_timings()).unwrap();
        let sb = serde_json::to_string(&b.without_timings()).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn timings_aggregate_iteration_seconds() {
        let report = RunReport::from_fit(serde_json::Value::Null, &fit());
        assert!((report.timings.total_seconds - 0.6).abs() < 1e-15);
        assert!((report.timings.per_iteration_seconds - 0.3).abs() < 1e-15);
    }
}
