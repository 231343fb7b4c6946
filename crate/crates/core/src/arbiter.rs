//! Fusion of baseline perception with logic verdicts.

use serde::{Deserialize, Serialize};

use crate::rules::DerivationTree;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArbiterError {
    #[error("dynamic threshold needs at least one uncertainty value")]
    Empty,
    #[error("threshold fraction must be positive and finite, got {0}")]
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Light,
    Obstacle,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Light => "light",
            Task::Obstacle => "obstacle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyKind {
    Aleatoric,
    Epistemic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// `fraction` times the mean uncertainty over the whole recording.
    Dynamic { fraction: f64 },
    /// Same, but the mean runs over the frames seen so far.
    Online { fraction: f64 },
    Static { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    FullyActive,
    UncertaintyInvoked { kind: UncertaintyKind, threshold: ThresholdPolicy },
}

pub const DEFAULT_FRACTION: f64 = 1.0;
pub const DEFAULT_EPISTEMIC_THRESHOLD: f64 = 0.5;

impl FusionMode {
    /// Aleatoric uncertainty with a dynamic threshold.
    pub fn aleatoric() -> Self {
        FusionMode::UncertaintyInvoked {
            kind: UncertaintyKind::Aleatoric,
            threshold: ThresholdPolicy::Dynamic { fraction: DEFAULT_FRACTION },
        }
    }

    /// Epistemic uncertainty with a static threshold.
    pub fn epistemic() -> Self {
        FusionMode::UncertaintyInvoked {
            kind: UncertaintyKind::Epistemic,
            threshold: ThresholdPolicy::Static { value: DEFAULT_EPISTEMIC_THRESHOLD },
        }
    }

    pub fn label(&self) -> String {
        match self {
            FusionMode::FullyActive => "fully-active".into(),
            FusionMode::UncertaintyInvoked { kind, threshold } => {
                let k = match kind {
                    UncertaintyKind::Aleatoric => "aleatoric",
                    UncertaintyKind::Epistemic => "epistemic",
                };
                let t = match threshold {
                    ThresholdPolicy::Dynamic { fraction } => format!("dynamic x{fraction}"),
                    ThresholdPolicy::Online { fraction } => format!("online x{fraction}"),
                    ThresholdPolicy::Static { value } => format!("static {value}"),
                };
                format!("uncertainty ({k}, {t})")
            }
        }
    }
}

/// `fraction` times the mean of the uncertainties. Signed values are used
/// as they are, so aleatoric thresholds are negative.
pub fn dynamic_threshold(uncertainties: &[f64], fraction: f64) -> Result<f64, ArbiterError> {
    if !(fraction > 0.0 && fraction.is_finite()) {
        return Err(ArbiterError::Fraction(fraction));
    }
    if uncertainties.is_empty() {
        return Err(ArbiterError::Empty);
    }
    Ok(fraction * uncertainties.iter().sum::<f64>() / uncertainties.len() as f64)
}

/// The logic layer's answer for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicOutcome {
    pub applicable: bool,
    pub positive: bool,
    pub derivation: Option<DerivationTree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicSummary {
    pub applicable: bool,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDecision {
    pub frame: u64,
    pub task: Task,
    pub baseline: bool,
    pub logic: Option<LogicSummary>,
    #[serde(rename = "final")]
    pub final_label: bool,
    /// Whether the logic layer was consulted.
    pub invoked: bool,
    /// Rendered derivation, or "baseline".
    pub explanation: String,
}

impl FrameDecision {
    pub fn logic_applicable(&self) -> bool {
        self.logic.as_ref().is_some_and(|l| l.applicable)
    }
}

fn baseline_only(frame: u64, task: Task, baseline: bool, logic: Option<LogicSummary>, invoked: bool) -> FrameDecision {
    FrameDecision { frame, task, baseline, logic, final_label: baseline, invoked, explanation: "baseline".into() }
}

/// Logic consulted on every frame; when it applies its label wins.
pub fn fuse_fully_active(frame: u64, task: Task, baseline: bool, logic: LogicOutcome) -> FrameDecision {
    let summary = LogicSummary { applicable: logic.applicable, positive: logic.positive };
    if !logic.applicable {
        return baseline_only(frame, task, baseline, Some(summary), false);
    }
    FrameDecision {
        frame,
        task,
        baseline,
        logic: Some(summary),
        final_label: logic.positive,
        invoked: true,
        explanation: logic.derivation.map_or_else(|| "baseline".into(), |d| d.render()),
    }
}

/// Logic consulted only when `uncertainty > threshold`; `logic` is not
/// called otherwise.
pub fn fuse_uncertainty_invoked<E>(
    frame: u64,
    task: Task,
    baseline: bool,
    uncertainty: f64,
    threshold: f64,
    logic: impl FnOnce() -> Result<LogicOutcome, E>,
) -> Result<FrameDecision, E> {
    if !(uncertainty > threshold) {
        return Ok(baseline_only(frame, task, baseline, None, false));
    }
    let mut d = fuse_fully_active(frame, task, baseline, logic()?);
    d.invoked = true;
    Ok(d)
}

/// Hook for discrepancy handling beyond favouring the logic label, such as
/// warnings or re-evaluation requests. Does nothing.
pub fn on_discrepancy(_decision: &FrameDecision) {}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(applicable: bool, positive: bool) -> LogicOutcome {
        LogicOutcome { applicable, positive, derivation: None }
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(dynamic_threshold(&[0.3, 0.3, 0.3], 1.0).unwrap(), 0.3);
        assert!((dynamic_threshold(&[-0.9, -0.5], 1.0).unwrap() + 0.7).abs() < 1e-15);
        let full = dynamic_threshold(&[-0.9, -0.5], 1.0).unwrap();
        assert_eq!(dynamic_threshold(&[-0.9, -0.5], 0.5).unwrap(), full * 0.5);
        assert_eq!(dynamic_threshold(&[], 1.0), Err(ArbiterError::Empty));
        assert!(dynamic_threshold(&[1.0], 0.0).is_err());
    }

    #[test]
    fn fully_active_favours_applicable_logic() {
        let d = fuse_fully_active(1, Task::Light, false, outcome(true, true));
        assert!(d.final_label && d.invoked);
        let d = fuse_fully_active(1, Task::Light, true, outcome(false, false));
        assert!(d.final_label && !d.invoked);
        let d = fuse_fully_active(1, Task::Light, true, outcome(true, true));
        assert!(d.final_label && d.invoked);
    }

    #[test]
    fn confident_frames_never_call_logic() {
        let d = fuse_uncertainty_invoked::<()>(3, Task::Light, false, -0.9, -0.7, || panic!("called")).unwrap();
        assert!(!d.invoked && !d.final_label && d.logic.is_none());
        let d = fuse_uncertainty_invoked::<()>(3, Task::Light, false, -0.6, -0.7, || Ok(outcome(true, true))).unwrap();
        assert!(d.invoked && d.final_label);
        let d = fuse_uncertainty_invoked::<()>(3, Task::Light, false, -0.6, -0.7, || Ok(outcome(false, true))).unwrap();
        assert!(d.invoked && !d.final_label);
    }
}
