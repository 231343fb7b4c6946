//! Evaluation protocol: per-frame scoring of baseline, logic and hybrid
//! labels, and report rendering.

mod harness;
mod metrics;
mod report;

use serde::{Deserialize, Serialize};

pub use harness::{baseline_label, evaluate_recording, ground_truth, logic_outcome};
pub use metrics::{confusion, metrics, Confusion, Metrics};
pub use report::{render_report, render_reports, FrameRecord, Report, ReportFormat, CSV_HEADER, REPORT_VERSION};

use crate::arbiter::{ArbiterError, Task};
use crate::pipeline::PipelineError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {truths} ground-truth labels")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("unknown report format `{0}` (expected csv, markdown or structured)")]
    UnknownFormat(String),
    #[error("{0}")]
    Config(String),
    #[error("malformed report: {0}")]
    Format(String),
    #[error("recording has no observations; perceive it first")]
    NotPerceived,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Arbiter(#[from] ArbiterError),
}

/// A check attached to a scenario, e.g. `hybrid.recall >= 0.5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    /// Restricts the check to one task.
    #[serde(default)]
    pub task: Option<Task>,
    /// Restricts the check to "fully-active" or "uncertainty" runs.
    #[serde(default)]
    pub mode: Option<String>,
    /// `<model>.<metric>` or `logic_fraction`.
    pub metric: String,
    pub op: String,
    pub value: f64,
}

impl Assertion {
    pub fn applies_to(&self, report: &Report) -> bool {
        let mode_ok = match self.mode.as_deref() {
            None => true,
            Some("fully-active") => report.mode == crate::arbiter::FusionMode::FullyActive,
            Some("uncertainty") => report.mode != crate::arbiter::FusionMode::FullyActive,
            Some(_) => false,
        };
        mode_ok && self.task.is_none_or(|t| t == report.task)
    }

    /// `Ok(())` when satisfied; otherwise a message. N/A metrics never satisfy.
    pub fn check(&self, report: &Report) -> Result<(), String> {
        let actual = if self.metric == "logic_fraction" {
            Some(report.logic_fraction())
        } else {
            let (model, metric) = self.metric.split_once('.').ok_or_else(|| format!("bad metric `{}`", self.metric))?;
            let m = report.model(model).ok_or_else(|| format!("unknown model `{model}`"))?;
            match metric {
                "accuracy" => m.accuracy,
                "precision" => m.precision,
                "recall" => m.recall,
                "f_score" => m.f_score,
                other => return Err(format!("unknown metric `{other}`")),
            }
        };
        let Some(a) = actual else {
            return Err(format!("{} is N/A", self.metric));
        };
        let ok = match self.op.as_str() {
            ">=" => a >= self.value,
            "<=" => a <= self.value,
            ">" => a > self.value,
            "<" => a < self.value,
            "==" => a == self.value,
            other => return Err(format!("unknown operator `{other}`")),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("{} = {a} violates {} {}", self.metric, self.op, self.value))
        }
    }
}
