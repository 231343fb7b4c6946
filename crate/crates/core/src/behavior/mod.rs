//! Behaviour events from trajectories and their windowed clustering.

mod cluster;
mod dbscan;
mod label;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cluster::{cluster_behaviors, detect_action_changes, ActionChange, BehaviorCluster, ClusteringConfig, MemberEvent};
pub use dbscan::dbscan;
pub use label::label_behavior;

use crate::geometry::Aabb;
use crate::sim::Frame;

#[derive(Debug, thiserror::Error)]
pub enum BehaviorError {
    #[error("track of vehicle {vehicle} has {frames} frames; at least 2 are needed")]
    ShortTrack { vehicle: u32, frames: usize },
    #[error("invalid clustering config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorCategory {
    ChangeLaneLeft,
    ChangeLaneRight,
    Straight,
    TurnLeft,
    TurnRight,
    LaneFollow,
}

impl BehaviorCategory {
    pub const ALL: [BehaviorCategory; 6] = [
        BehaviorCategory::ChangeLaneLeft,
        BehaviorCategory::ChangeLaneRight,
        BehaviorCategory::Straight,
        BehaviorCategory::TurnLeft,
        BehaviorCategory::TurnRight,
        BehaviorCategory::LaneFollow,
    ];

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BehaviorCategory::ChangeLaneLeft => "change_lane_left",
            BehaviorCategory::ChangeLaneRight => "change_lane_right",
            BehaviorCategory::Straight => "straight",
            BehaviorCategory::TurnLeft => "turn_left",
            BehaviorCategory::TurnRight => "turn_right",
            BehaviorCategory::LaneFollow => "lane_follow",
        }
    }

    pub fn is_lane_change(&self) -> bool {
        matches!(self, BehaviorCategory::ChangeLaneLeft | BehaviorCategory::ChangeLaneRight)
    }

    /// Only assignable inside an intersection.
    pub fn is_intersection_behavior(&self) -> bool {
        matches!(self, BehaviorCategory::Straight | BehaviorCategory::TurnLeft | BehaviorCategory::TurnRight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame: u64,
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub lane_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorEvent {
    pub vehicle: u32,
    pub category: BehaviorCategory,
    pub start_frame: u64,
    pub end_frame: u64,
    pub start_time: f64,
    pub end_time: f64,
    pub start_x: f64,
    pub start_y: f64,
    /// Heading at the start of the event.
    #[serde(default)]
    pub heading: f64,
}

/// Per-vehicle tracks in frame order.
pub fn tracks_from_frames(frames: &[Frame]) -> BTreeMap<u32, Vec<TrackPoint>> {
    let mut tracks: BTreeMap<u32, Vec<TrackPoint>> = BTreeMap::new();
    for f in frames {
        for v in &f.vehicles {
            tracks.entry(v.id).or_default().push(TrackPoint {
                frame: f.index,
                time: f.time,
                x: v.x,
                y: v.y,
                heading: v.heading,
                vx: v.vx,
                vy: v.vy,
                lane_id: v.lane_id,
            });
        }
    }
    tracks
}

/// Labels every vehicle track of a recording. Tracks shorter than two frames
/// are skipped.
pub fn label_recording(frames: &[Frame], lane_width: f64) -> Vec<BehaviorEvent> {
    let Some(first) = frames.first() else {
        return Vec::new();
    };
    let boxes: Vec<Aabb> = first.intersections.iter().map(|i| i.bbox).collect();
    tracks_from_frames(frames)
        .iter()
        .filter_map(|(id, track)| label_behavior(*id, track, &boxes, lane_width).ok())
        .flatten()
        .collect()
}
