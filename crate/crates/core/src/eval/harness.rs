use crate::arbiter::{
    dynamic_threshold, fuse_fully_active, fuse_uncertainty_invoked, FrameDecision, FusionMode, LogicOutcome, Task,
    ThresholdPolicy, UncertaintyKind,
};
use crate::bridge::{logic_light_verdict, logic_obstacle_verdict, MapGeometry, Rulebase};
use crate::perception::Observation;
use crate::pipeline::{FactStream, PipelineError, ProtocolConfig};
use crate::recording::Recording;
use crate::sim::{ground_truth_light_with, ground_truth_obstacle_ahead, Frame, WorldConfig, OBSTACLE_LOOKAHEAD};

use super::{metrics, Confusion, EvalError, FrameRecord, Report, REPORT_VERSION};

/// Ground-truth label of a frame: red-impacting light for the ego, or an
/// obstacle ahead in its lane.
pub fn ground_truth(frame: &Frame, task: Task, config: &WorldConfig) -> bool {
    match task {
        Task::Light => ground_truth_light_with(frame, frame.ego_id, config.vehicle.approach_zone).unwrap_or(false),
        Task::Obstacle => ground_truth_obstacle_ahead(frame).is_some(),
    }
}

/// The perception-only label of a frame.
pub fn baseline_label(frame: &Frame, obs: &Observation, task: Task, lane_width: f64) -> bool {
    match task {
        Task::Light => obs.light_red(),
        Task::Obstacle => obs.obstacle_ahead(frame.ego_id, lane_width, OBSTACLE_LOOKAHEAD),
    }
}

fn uncertainty(obs: &Observation, task: Task, kind: UncertaintyKind) -> Result<f64, EvalError> {
    match (task, kind) {
        (Task::Light, UncertaintyKind::Aleatoric) => Ok(obs.light_prediction.u_alea()),
        (Task::Light, UncertaintyKind::Epistemic) => Ok(obs.light_prediction.u_epis()),
        (Task::Obstacle, UncertaintyKind::Epistemic) => Ok(obs.bev.epistemic_ahead),
        (Task::Obstacle, UncertaintyKind::Aleatoric) => {
            Err(EvalError::Config("the obstacle task has no aleatoric signal; use epistemic".into()))
        }
    }
}

/// The logic layer's verdict at position `k` of a fact stream.
pub fn logic_outcome(stream: &FactStream, k: usize, task: Task, rulebase: &Rulebase) -> Result<LogicOutcome, PipelineError> {
    let facts = stream.facts(k)?;
    Ok(match task {
        Task::Light => {
            let v = logic_light_verdict(&facts, rulebase)?;
            LogicOutcome { applicable: v.applicable, positive: v.red, derivation: v.derivation }
        }
        Task::Obstacle => {
            let v = logic_obstacle_verdict(&facts, rulebase)?;
            LogicOutcome { applicable: v.applicable, positive: v.obstacle, derivation: v.derivation }
        }
    })
}

/// Runs baseline, logic and hybrid over every frame of a perceived
/// recording and scores them.
pub fn evaluate_recording(
    recording: &Recording,
    mode: FusionMode,
    task: Task,
    rulebase: &Rulebase,
    protocol: &ProtocolConfig,
) -> Result<Report, EvalError> {
    let observations = recording.observations.as_deref().ok_or(EvalError::NotPerceived)?;
    let frames = &recording.frames;
    let map = MapGeometry::from_map(&recording.config.map);
    let lane_width = map.lane_width;
    let stream = FactStream::new(frames, observations, map, protocol.clone())?;

    let (signal, threshold) = match mode {
        FusionMode::FullyActive => (Vec::new(), None),
        FusionMode::UncertaintyInvoked { kind, threshold } => {
            let u = observations.iter().map(|o| uncertainty(o, task, kind)).collect::<Result<Vec<_>, _>>()?;
            let t = match threshold {
                ThresholdPolicy::Dynamic { fraction } => Some(dynamic_threshold(&u, fraction)?),
                ThresholdPolicy::Static { value } => Some(value),
                ThresholdPolicy::Online { fraction } => {
                    dynamic_threshold(&u[..1.min(u.len())], fraction)?;
                    None
                }
            };
            (u, t)
        }
    };

    let mut decisions: Vec<FrameDecision> = Vec::with_capacity(frames.len());
    let mut running = 0.0;
    for (k, (frame, obs)) in frames.iter().zip(observations).enumerate() {
        let base = baseline_label(frame, obs, task, lane_width);
        let d = match mode {
            FusionMode::FullyActive => fuse_fully_active(frame.index, task, base, logic_outcome(&stream, k, task, rulebase)?),
            FusionMode::UncertaintyInvoked { threshold: policy, .. } => {
                running += signal[k];
                let t = match (threshold, policy) {
                    (Some(t), _) => t,
                    (None, ThresholdPolicy::Online { fraction }) => fraction * running / (k + 1) as f64,
                    (None, _) => unreachable!("only the online policy has no fixed threshold"),
                };
                fuse_uncertainty_invoked(frame.index, task, base, signal[k], t, || logic_outcome(&stream, k, task, rulebase))?
            }
        };
        decisions.push(d);
    }

    let truths: Vec<bool> = frames.iter().map(|f| ground_truth(f, task, &recording.config)).collect();
    let (mut b, mut l, mut h, mut ha) = (Confusion::default(), Confusion::default(), Confusion::default(), Confusion::default());
    for (d, &t) in decisions.iter().zip(&truths) {
        b.add(d.baseline, t);
        h.add(d.final_label, t);
        if let Some(s) = d.logic.as_ref().filter(|s| s.applicable) {
            l.add(s.positive, t);
            ha.add(d.final_label, t);
        }
    }
    Ok(Report {
        version: REPORT_VERSION.to_string(),
        scenario: recording.name(),
        task,
        mode,
        threshold,
        frames: frames.len(),
        logic_evaluations: decisions.iter().filter(|d| d.logic.is_some()).count(),
        applicable_frames: decisions.iter().filter(|d| d.logic_applicable()).count(),
        baseline: metrics(&b),
        logic: metrics(&l),
        hybrid: metrics(&h),
        hybrid_applicable: metrics(&ha),
        decisions: decisions.into_iter().zip(truths).map(|(decision, truth)| FrameRecord { decision, truth }).collect(),
    })
}
