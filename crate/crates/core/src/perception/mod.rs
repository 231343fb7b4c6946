//! Synthetic perception: detections with occlusion, an evidential light
//! classifier over simulated camera features, and a BEV grid with per-cell
//! Dirichlet uncertainty.

mod bev;
mod features;
mod occlusion;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edl::{DirichletPrediction, EdlError, EvidentialModel, Sample};
use crate::geometry::{to_local, Aabb};
use crate::sim::{ground_truth_light_with, Approach, Frame, MapConfig, ObstacleKind, WorldConfig};

pub use bev::{bev_rasterize, BevClass, BevGrid, BevSummary, BEV_CLASSES};
pub use features::{clean_light_features, extract_light_features, FeatureVector, LIGHT_FEATURES};
pub use occlusion::occlusion_check;

/// Class index of "red-impacting" in light predictions.
pub const RED: usize = 0;

#[derive(Debug, thiserror::Error)]
pub enum PerceptionError {
    #[error("invalid perception config: {0}")]
    Config(String),
    #[error("unknown observer {0}")]
    UnknownObserver(u32),
    #[error(transparent)]
    Model(#[from] EdlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    pub seed: u64,
    pub weather_noise: f64,
    pub detection_range: f64,
    pub false_negative_rate: f64,
    pub ood_classes: Vec<ObstacleKind>,
    pub cell_size: f64,
    pub extent: f64,
    /// Distance from a light within which it governs the ego.
    pub approach_zone: f64,
    /// Forward reach of the BEV corridor checked for uncertainty.
    pub corridor_length: f64,
    pub map: MapConfig,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig {
            seed: 0,
            weather_noise: 0.0,
            detection_range: 50.0,
            false_negative_rate: 0.0,
            ood_classes: vec![ObstacleKind::Animal],
            cell_size: 1.0,
            extent: 100.0,
            approach_zone: 40.0,
            corridor_length: 48.0,
            map: MapConfig::default(),
        }
    }
}

impl PerceptionConfig {
    /// Perception matched to a world: same map, seed and weather.
    pub fn for_world(world: &WorldConfig) -> Self {
        PerceptionConfig {
            seed: world.seed,
            weather_noise: world.weather_noise,
            approach_zone: world.vehicle.approach_zone,
            map: world.map.clone(),
            ..PerceptionConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        let bad = |m: &str| Err(PerceptionError::Config(m.to_string()));
        if !(self.weather_noise >= 0.0 && self.weather_noise.is_finite()) {
            return bad("weather_noise must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.false_negative_rate) {
            return bad("false_negative_rate must lie in [0, 1]");
        }
        if !(self.cell_size > 0.0) || !(self.extent >= self.cell_size) {
            return bad("cell_size must be positive and no larger than extent");
        }
        if !(self.detection_range > 0.0) || !(self.approach_zone > 0.0) {
            return bad("ranges must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedVehicle {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    #[serde(flatten)]
    pub bbox: Aabb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedObstacle {
    pub id: u32,
    pub kind: ObstacleKind,
    pub x: f64,
    pub y: f64,
    #[serde(flatten)]
    pub bbox: Aabb,
}

/// Perception output for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub frame: u64,
    pub vehicles: Vec<DetectedVehicle>,
    pub obstacles: Vec<DetectedObstacle>,
    pub light_features: FeatureVector,
    pub light_prediction: DirichletPrediction,
    /// Set when noise injection swapped a red prediction.
    pub light_flipped: bool,
    pub bev: BevSummary,
}

impl Observation {
    /// Baseline light decision: red-impacting iff its probability exceeds 1/2.
    pub fn light_red(&self) -> bool {
        self.light_prediction.probabilities()[RED] > 0.5
    }

    pub fn light_epistemic(&self) -> f64 {
        self.light_prediction.u_epis()
    }

    /// Baseline obstacle decision: a detected obstacle ahead of the ego,
    /// within `lookahead` metres and half a lane of its centre line.
    pub fn obstacle_ahead(&self, ego_id: u32, lane_width: f64, lookahead: f64) -> bool {
        let Some(ego) = self.vehicles.iter().find(|v| v.id == ego_id) else {
            return false;
        };
        let heading = Approach::from_heading(ego.heading).heading();
        self.obstacles.iter().any(|o| {
            let (lon, lat) = to_local(o.x - ego.x, o.y - ego.y, heading);
            lon > 0.0 && lon <= lookahead && lat.abs() <= lane_width / 2.0
        })
    }
}

/// Independent, reproducible random stream per frame and purpose.
fn frame_rng(seed: u64, frame: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame.wrapping_mul(4).wrapping_add(purpose));
    rng
}

const STREAM_FEATURES: u64 = 0;
const STREAM_FLIP: u64 = 1;
const STREAM_BEV: u64 = 2;

/// Perceives one frame. Randomness is derived from the config seed and the
/// frame index, so the result depends only on its inputs.
pub fn sense_frame(frame: &Frame, config: &PerceptionConfig, model: &EvidentialModel) -> Result<Observation, PerceptionError> {
    config.validate()?;
    let ego = frame.ego();
    let in_range = |b: &Aabb| {
        let (x, y) = b.center();
        (x - ego.x).hypot(y - ego.y) <= config.detection_range
    };

    let mut vehicles = Vec::new();
    for v in &frame.vehicles {
        if v.id == ego.id || (in_range(&v.bbox) && occlusion_check(frame, ego.id, &v.bbox)?) {
            vehicles.push(DetectedVehicle { id: v.id, x: v.x, y: v.y, heading: v.heading, vx: v.vx, vy: v.vy, bbox: v.bbox });
        }
    }
    let mut obstacles = Vec::new();
    for o in &frame.obstacles {
        if config.ood_classes.contains(&o.kind) || !in_range(&o.bbox) {
            continue;
        }
        if occlusion_check(frame, ego.id, &o.bbox)? {
            obstacles.push(DetectedObstacle { id: o.id, kind: o.kind, x: o.x, y: o.y, bbox: o.bbox });
        }
    }

    let features = extract_light_features(frame, config, &mut frame_rng(config.seed, frame.index, STREAM_FEATURES));
    let mut prediction = model.predict(features.as_slice())?;
    let mut flipped = false;
    if config.false_negative_rate > 0.0 && prediction.probabilities()[RED] > 0.5 {
        let mut rng = frame_rng(config.seed, frame.index, STREAM_FLIP);
        if rng.random_bool(config.false_negative_rate) {
            prediction.alpha.swap(0, 1);
            flipped = true;
        }
    }

    let grid = bev_rasterize(frame, config, &mut frame_rng(config.seed, frame.index, STREAM_BEV));
    Ok(Observation {
        frame: frame.index,
        vehicles,
        obstacles,
        light_features: features,
        light_prediction: prediction,
        light_flipped: flipped,
        bev: grid.summary(config.map.lane_width, config.corridor_length),
    })
}

/// The BEV grid `sense_frame` summarises for this frame.
pub fn sense_bev(frame: &Frame, config: &PerceptionConfig) -> BevGrid {
    bev_rasterize(frame, config, &mut frame_rng(config.seed, frame.index, STREAM_BEV))
}

/// Labelled light samples from a recording, one per frame. Class 0 is
/// red-impacting.
pub fn light_training_set(frames: &[Frame], config: &PerceptionConfig) -> Vec<Sample> {
    frames
        .iter()
        .map(|f| {
            let x = extract_light_features(f, config, &mut frame_rng(config.seed, f.index, STREAM_FEATURES));
            let red = ground_truth_light_with(f, f.ego_id, config.approach_zone).unwrap_or(false);
            Sample { features: x.0.to_vec(), label: if red { vec![1.0, 0.0] } else { vec![0.0, 1.0] } }
        })
        .collect()
}
