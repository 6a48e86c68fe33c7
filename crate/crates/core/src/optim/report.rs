//! Run reports: per-iteration history and the reason a fit stopped.

use serde::{Deserialize, Serialize};

/// Why a fit ended. `Diverged` never terminates a successful run; it only
/// labels the partial report carried inside a divergence error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    #[serde(rename = "cost-tol")]
    CostTol,
    #[serde(rename = "rel-cost-tol")]
    RelCostTol,
    #[serde(rename = "rel-param-tol")]
    RelParamTol,
    #[serde(rename = "max-iters")]
    MaxIters,
    #[serde(rename = "epochs-done")]
    EpochsDone,
    #[serde(rename = "linesearch-failure")]
    LinesearchFailure,
    #[serde(rename = "diverged")]
    Diverged,
}

impl Termination {
    /// The kebab-case name used in serialized reports.
    pub fn label(self) -> &'static str {
        match self {
            Termination::CostTol => "cost-tol",
            Termination::RelCostTol => "rel-cost-tol",
            Termination::RelParamTol => "rel-param-tol",
            Termination::MaxIters => "max-iters",
            Termination::EpochsDone => "epochs-done",
            Termination::LinesearchFailure => "linesearch-failure",
            Termination::Diverged => "diverged",
        }
    }
}

/// One batch iteration or one online update. `cost` is the empirical cost at
/// the iterate the step left (batch) or the mini-batch instantaneous cost
/// (online). `halvings` is always zero for online updates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub cost: f64,
    pub step: f64,
    pub grad_norm: f64,
    pub halvings: u32,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub termination: Termination,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: Vec<IterationRecord>,
}

impl FitReport {
    pub fn cost_history(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.cost).collect()
    }

    pub fn step_history(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.step).collect()
    }

    pub fn grad_norm_history(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.grad_norm).collect()
    }

    pub fn halvings_history(&self) -> Vec<u32> {
        self.iterations.iter().map(|r| r.halvings).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn termination_serializes_to_kebab_names() {
        let pairs = [
            (Termination::CostTol, "\"cost-tol\""),
            (Termination::RelCostTol, "\"rel-cost-tol\""),
            (Termination::RelParamTol, "\"rel-param-tol\""),
            (Termination::MaxIters, "\"max-iters\""),
            (Termination::EpochsDone, "\"epochs-done\""),
            (Termination::LinesearchFailure, "\"linesearch-failure\""),
            (Termination::Diverged, "\"diverged\""),
        ];
        for (value, expect) in pairs {
            assert_eq!(serde_json::to_string(&value).unwrap(), expect);
            let back: Termination = serde_json::from_str(expect).unwrap();
            assert_eq!(back, value);
            assert_eq!(format!("\"{}\"", value.label()), expect);
        }
    }

    #[test]
    fn history_projections_line_up() {
        let report = FitReport {
            termination: Termination::MaxIters,
            initial_cost: 2.0,
            final_cost: 0.5,
            iterations: vec![
                IterationRecord {
                    cost: 2.0,
                    step: 0.1,
                    grad_norm: 3.0,
                    halvings: 1,
                    elapsed_seconds: 0.0,
                },
                IterationRecord {
                    cost: 1.0,
                    step: 0.05,
                    grad_norm: 2.0,
                    halvings: 0,
                    elapsed_seconds: 0.1,
                },
            ],
        };
        assert_eq!(report.cost_history(), vec![2.0, 1.0]);
        assert_eq!(report.step_history(), vec![0.1, 0.05]);
        assert_eq!(report.grad_norm_history(), vec![3.0, 2.0]);
        assert_eq!(report.halvings_history(), vec![1, 0]);
    }
}
