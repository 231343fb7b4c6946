//! Turns observations and behaviour clusters into per-frame fact bases and
//! reads light and obstacle verdicts back out of the rulebases.

mod facts;
mod verdict;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::behavior::{ActionChange, BehaviorCategory, BehaviorCluster};
use crate::geometry::Aabb;
use crate::rules::{load_rules, Fact, RuleError, StratifiedProgram};
use crate::sim::{MapConfig, Network};

pub use facts::facts_from_frame;
pub use verdict::{logic_applicable, logic_light_verdict, logic_obstacle_verdict, LightVerdict, ObstacleVerdict, RedVariant};

pub const TRAFFIC_LIGHT_RULES: &str = include_str!("../../rulebases/traffic_light.rules");
pub const OBSTACLE_RULES: &str = include_str!("../../rulebases/obstacle.rules");

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("observation is for frame {observation} but behaviour is for frame {behavior}")]
    FrameMismatch { observation: u64, behavior: u64 },
    #[error("ego vehicle {0} missing from the observation")]
    MissingEgo(u32),
    #[error(transparent)]
    Rules(#[from] RuleError),
}

/// Thresholds of the geometric helper facts. Distances in metres, angles in
/// degrees, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeConfig {
    /// Reach of `nearby_intersection`, ego bumper to box edge.
    pub nearby_radius: f64,
    /// Intersections further than this from the ego are not reported.
    pub intersection_range: f64,
    pub front_distance: f64,
    pub front_heading_tolerance: f64,
    /// Allowed deviation from perpendicular for `cluster_crossing`, and from
    /// parallel for `cluster_codirectional`.
    pub crossing_tolerance: f64,
    pub cluster_intersection_margin: f64,
    /// Lane-change clusters this close to an intersection are explained by it.
    pub intersection_exception_radius: f64,
    /// How far ahead of a lane-change cluster the blockage is looked for.
    pub obstacle_reach: f64,
    pub grace_period: f64,
    pub stopped_speed: f64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            nearby_radius: 50.0,
            intersection_range: 50.0,
            front_distance: 25.0,
            front_heading_tolerance: 15.0,
            crossing_tolerance: 30.0,
            cluster_intersection_margin: 5.0,
            intersection_exception_radius: 20.0,
            obstacle_reach: 50.0,
            grace_period: 2.0,
            stopped_speed: crate::sim::STOPPED_SPEED,
        }
    }
}

/// Static map knowledge available to the ego.
#[derive(Debug, Clone, PartialEq)]
pub struct MapGeometry {
    pub intersections: Vec<(u32, Aabb)>,
    pub lane_width: f64,
}

impl MapGeometry {
    pub fn from_map(map: &MapConfig) -> Self {
        let net = Network::new(map);
        MapGeometry {
            intersections: net.intersections.iter().map(|g| (g.id, g.bbox)).collect(),
            lane_width: map.lane_width,
        }
    }
}

/// What the behaviour layer knows at one frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSnapshot {
    pub frame: u64,
    /// Current behaviour of each observed vehicle.
    pub actions: BTreeMap<u32, BehaviorCategory>,
    pub clusters: Vec<BehaviorCluster>,
    pub changes: Vec<ActionChange>,
}

/// Per-frame context that is not part of the observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameContext {
    pub ego_id: u32,
    /// Seconds since the light ahead of the ego last turned green, while it
    /// stays green.
    pub since_green: Option<f64>,
}

/// Facts describing one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FactBase {
    pub frame: u64,
    pub facts: Vec<Fact>,
}

impl FactBase {
    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn with_pred<'a>(&'a self, pred: &'a str) -> impl Iterator<Item = &'a Fact> + 'a {
        self.facts.iter().filter(move |f| f.pred == pred)
    }

    /// One fact per line, in rule-file syntax.
    pub fn to_text(&self) -> String {
        self.facts.iter().map(|f| format!("{f}.\n")).collect()
    }
}

/// A named, stratified rule program.
#[derive(Debug, Clone)]
pub struct Rulebase {
    pub name: String,
    pub program: StratifiedProgram,
}

impl Rulebase {
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, RuleError> {
        Ok(Rulebase { name: name.into(), program: load_rules(text)? })
    }

    pub fn traffic_light() -> Self {
        Self::parse("traffic_light", TRAFFIC_LIGHT_RULES).expect("shipped traffic-light rules load")
    }

    pub fn obstacle() -> Self {
        Self::parse("obstacle", OBSTACLE_RULES).expect("shipped obstacle rules load")
    }
}
