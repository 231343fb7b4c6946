use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arbiter::{FrameDecision, FusionMode, Task};

use super::{EvalError, Metrics};

pub const REPORT_VERSION: &str = "report-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    #[serde(flatten)]
    pub decision: FrameDecision,
    pub truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub scenario: String,
    pub task: Task,
    pub mode: FusionMode,
    /// Invocation threshold in uncertainty-invoked mode.
    pub threshold: Option<f64>,
    pub frames: usize,
    /// Frames on which the logic layer ran.
    pub logic_evaluations: usize,
    /// Frames on which it ran and applied.
    pub applicable_frames: usize,
    /// Over all frames.
    pub baseline: Metrics,
    /// Over applicable frames.
    pub logic: Metrics,
    /// Over all frames.
    pub hybrid: Metrics,
    /// Over applicable frames.
    pub hybrid_applicable: Metrics,
    pub decisions: Vec<FrameRecord>,
}

impl Report {
    /// The (model, metrics) rows of the summary tables.
    pub fn rows(&self) -> [(&'static str, &Metrics); 3] {
        [("baseline", &self.baseline), ("logic", &self.logic), ("hybrid", &self.hybrid)]
    }

    pub fn model(&self, name: &str) -> Option<&Metrics> {
        match name {
            "baseline" => Some(&self.baseline),
            "logic" => Some(&self.logic),
            "hybrid" => Some(&self.hybrid),
            "hybrid_applicable" => Some(&self.hybrid_applicable),
            _ => None,
        }
    }

    /// Share of frames on which the logic layer ran.
    pub fn logic_fraction(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.logic_evaluations as f64 / self.frames as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let r: Report = serde_json::from_str(text).map_err(|e| EvalError::Format(e.to_string()))?;
        if r.version != REPORT_VERSION {
            return Err(EvalError::Format(format!("expected {REPORT_VERSION}, found {}", r.version)));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Structured,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(EvalError::UnknownFormat(other.to_string())),
        }
    }
}

pub const CSV_HEADER: &str = "scenario,model,accuracy,precision,recall,f_score";

fn csv_cell(x: Option<f64>) -> String {
    x.map_or_else(|| "N/A".to_string(), |v| v.to_string())
}

fn md_cell(x: Option<f64>) -> String {
    x.map_or_else(|| "N/A".to_string(), |v| format!("{v:.4}"))
}

fn title(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// Renders one table over several reports: one row per (scenario, model).
pub fn render_reports(reports: &[Report], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Structured => {
            let list: Vec<&Report> = reports.iter().collect();
            out = serde_json::to_string_pretty(&list).expect("reports serialize");
            out.push('\n');
        }
        ReportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in reports {
                for (model, m) in r.rows() {
                    let _ = writeln!(
                        out,
                        "{},{model},{},{},{},{}",
                        r.scenario,
                        csv_cell(m.accuracy),
                        csv_cell(m.precision),
                        csv_cell(m.recall),
                        csv_cell(m.f_score)
                    );
                }
            }
        }
        ReportFormat::Markdown => {
            let head = reports.first().map_or_else(String::new, |r| {
                format!("{} {}", title(&r.mode.label()), if r.task == Task::Light { "Traffic Lights" } else { "Obstacles" })
            });
            let _ = writeln!(out, "| {head} | Accuracy | Precision | Recall | F-Score |");
            out.push_str("|---|---:|---:|---:|---:|\n");
            for r in reports {
                for (model, m) in r.rows() {
                    let _ = writeln!(
                        out,
                        "| {} {} | {} | {} | {} | {} |",
                        r.scenario,
                        title(model),
                        md_cell(m.accuracy),
                        md_cell(m.precision),
                        md_cell(m.recall),
                        md_cell(m.f_score)
                    );
                }
            }
        }
    }
    out
}

pub fn render_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Structured => report.to_json() + "\n",
        f => render_reports(std::slice::from_ref(report), f),
    }
}
