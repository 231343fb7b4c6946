//! Per-frame glue between the simulator, perception, behaviour analysis and
//! the knowledge bridge.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::behavior::{
    cluster_behaviors, detect_action_changes, label_recording, BehaviorError, BehaviorEvent, ClusteringConfig,
};
use crate::bridge::{facts_from_frame, BehaviorSnapshot, BridgeConfig, BridgeError, FactBase, FrameContext, MapGeometry};
use crate::edl::EvidentialModel;
use crate::geometry::to_local;
use crate::perception::{sense_frame, Observation, PerceptionConfig, PerceptionError};
use crate::sim::{approach_of, Approach, Frame, LightColor};

/// Settings of the evaluation protocol shared by every stage after perception.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub clustering: ClusteringConfig,
    pub bridge: BridgeConfig,
    /// Side of the square BEV window in which behaviours are recognised.
    pub bev_extent: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            clustering: ClusteringConfig::default(),
            bridge: BridgeConfig::default(),
            bev_extent: PerceptionConfig::default().extent,
        }
    }
}

pub fn perceive_frames(
    frames: &[Frame],
    config: &PerceptionConfig,
    model: &EvidentialModel,
) -> Result<Vec<Observation>, PerceptionError> {
    config.validate()?;
    frames.iter().map(|f| sense_frame(f, config, model)).collect()
}

/// Behaviour events of a recording and the frame each became visible.
///
/// Events come from the trajectory labeller, so a category is known from the
/// event's first visible frame on. An event is visible once its vehicle lies
/// inside the ego's BEV window, occluded or not.
#[derive(Debug, Clone)]
pub struct BehaviorTimeline {
    events: Vec<BehaviorEvent>,
    seen: Vec<Option<u64>>,
}

impl BehaviorTimeline {
    /// `half_extent` is half the side of the square BEV window.
    pub fn new(frames: &[Frame], lane_width: f64, half_extent: f64) -> Self {
        let events = label_recording(frames, lane_width);
        let by_index: HashMap<u64, &Frame> = frames.iter().map(|f| (f.index, f)).collect();
        let in_window = |k: u64, id: u32| {
            by_index.get(&k).is_some_and(|f| {
                let ego = f.ego();
                f.vehicle(id).is_some_and(|v| {
                    let (lon, lat) = to_local(v.x - ego.x, v.y - ego.y, ego.heading);
                    lon.abs() <= half_extent && lat.abs() <= half_extent
                })
            })
        };
        let seen = events.iter().map(|e| (e.start_frame..=e.end_frame).find(|&k| in_window(k, e.vehicle))).collect();
        BehaviorTimeline { events, seen }
    }

    pub fn events(&self) -> &[BehaviorEvent] {
        &self.events
    }

    /// Events observed by `frame`.
    pub fn visible(&self, frame: u64) -> Vec<BehaviorEvent> {
        self.events.iter().zip(&self.seen).filter(|(_, s)| s.is_some_and(|s| s <= frame)).map(|(e, _)| e.clone()).collect()
    }

    pub fn snapshot(
        &self,
        frame: &Frame,
        observation: &Observation,
        clustering: &ClusteringConfig,
    ) -> Result<BehaviorSnapshot, BehaviorError> {
        let visible = self.visible(frame.index);
        let clusters = cluster_behaviors(&visible, frame.time, frame.index, clustering, frame.ego_id)?;
        let changes = detect_action_changes(&clusters, &visible);
        let observed: BTreeSet<u32> = observation.vehicles.iter().map(|v| v.id).collect();
        let actions: BTreeMap<_, _> = visible
            .iter()
            .filter(|e| observed.contains(&e.vehicle) && e.start_frame <= frame.index && frame.index <= e.end_frame)
            .map(|e| (e.vehicle, e.category))
            .collect();
        Ok(BehaviorSnapshot { frame: frame.index, actions, clusters, changes })
    }
}

/// Seconds since the light governing the ego's approach turned green, for
/// frames where it is green and the change was seen.
pub fn green_clock(frames: &[Frame]) -> Vec<Option<f64>> {
    let mut last_green: HashMap<(u32, Approach), f64> = HashMap::new();
    let mut previous: HashMap<(u32, Approach), LightColor> = HashMap::new();
    frames
        .iter()
        .map(|f| {
            for l in &f.lights {
                let key = (l.intersection, l.approach);
                if l.state == LightColor::Green && previous.get(&key).is_some_and(|p| *p != LightColor::Green) {
                    last_green.insert(key, f.time);
                }
                previous.insert(key, l.state);
            }
            let a = approach_of(f, f.ego())?;
            let key = (a.intersection, a.approach);
            (f.light(a.intersection, a.approach) == Some(LightColor::Green))
                .then(|| last_green.get(&key).map(|t0| f.time - t0))
                .flatten()
        })
        .collect()
}

/// Fact bases for every frame of a perceived recording.
pub struct FactStream<'a> {
    frames: &'a [Frame],
    observations: &'a [Observation],
    timeline: BehaviorTimeline,
    clock: Vec<Option<f64>>,
    map: MapGeometry,
    protocol: ProtocolConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{frames} frames but {observations} observations")]
    Length { frames: usize, observations: usize },
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

impl<'a> FactStream<'a> {
    pub fn new(
        frames: &'a [Frame],
        observations: &'a [Observation],
        map: MapGeometry,
        protocol: ProtocolConfig,
    ) -> Result<Self, PipelineError> {
        if frames.len() != observations.len() {
            return Err(PipelineError::Length { frames: frames.len(), observations: observations.len() });
        }
        protocol.clustering.validate()?;
        Ok(FactStream {
            timeline: BehaviorTimeline::new(frames, map.lane_width, protocol.bev_extent / 2.0),
            clock: green_clock(frames),
            frames,
            observations,
            map,
            protocol,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn timeline(&self) -> &BehaviorTimeline {
        &self.timeline
    }

    /// Fact base of the frame at position `k`.
    pub fn facts(&self, k: usize) -> Result<FactBase, PipelineError> {
        let (frame, obs) = (&self.frames[k], &self.observations[k]);
        let snapshot = self.timeline.snapshot(frame, obs, &self.protocol.clustering)?;
        let ctx = FrameContext { ego_id: frame.ego_id, since_green: self.clock[k] };
        Ok(facts_from_frame(obs, &snapshot, &ctx, &self.map, &self.protocol.bridge)?)
    }
}
