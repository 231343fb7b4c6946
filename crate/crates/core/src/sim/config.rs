use serde::{Deserialize, Serialize};

use super::SimError;

fn default_tick_rate() -> f64 {
    10.0
}
fn default_block_length() -> f64 {
    200.0
}
fn default_lanes() -> usize {
    2
}
fn default_lane_width() -> f64 {
    3.5
}
fn default_one() -> usize {
    1
}

/// Full description of a simulated world. Mirrors the scenario TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    /// Free-form archetype name ("intersection", "obstruction", ...).
    #[serde(default)]
    pub archetype: Option<String>,
    pub seed: u64,
    #[serde(default = "default_tick_rate")]
    pub tick_rate: f64,
    /// Seconds of simulated time.
    pub duration: f64,
    #[serde(default)]
    pub map: MapConfig,
    #[serde(default)]
    pub npc_count: usize,
    /// NPCs (counted in `npc_count`) placed in the ego lane directly ahead of it.
    #[serde(default)]
    pub lead_vehicles: usize,
    /// Restricts random NPC placement to these roads; all roads when absent.
    #[serde(default)]
    pub spawn_roads: Option<Vec<RoadRef>>,
    /// Restricts random NPC placement to exactly these lanes; overrides
    /// `spawn_roads`.
    #[serde(default)]
    pub spawn_lanes: Option<Vec<LaneRef>>,
    /// One entry for all intersections, or one per intersection.
    #[serde(default = "default_timings")]
    pub light_timings: Vec<LightTimings>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub weather_noise: f64,
    /// Probability that a spawned NPC ignores red lights.
    #[serde(default)]
    pub violation_rate: f64,
    #[serde(default)]
    pub ego: EgoSpec,
    #[serde(default)]
    pub vehicle: VehicleParams,
}

fn default_timings() -> Vec<LightTimings> {
    vec![LightTimings::default()]
}

/// Grid town: `blocks_x` north-south roads crossing `blocks_y` east-west
/// roads, every road a ring of `block_length` metres per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    #[serde(default = "default_one")]
    pub blocks_x: usize,
    #[serde(default = "default_one")]
    pub blocks_y: usize,
    #[serde(default = "default_block_length")]
    pub block_length: f64,
    #[serde(default = "default_lanes")]
    pub lanes_per_direction: usize,
    #[serde(default = "default_lane_width")]
    pub lane_width: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            blocks_x: 1,
            blocks_y: 1,
            block_length: default_block_length(),
            lanes_per_direction: default_lanes(),
            lane_width: default_lane_width(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightTimings {
    pub green: f64,
    pub yellow: f64,
    pub red: f64,
}

impl Default for LightTimings {
    fn default() -> Self {
        LightTimings { green: 12.0, yellow: 3.0, red: 17.0 }
    }
}

impl LightTimings {
    pub fn cycle(&self) -> f64 {
        self.green + self.yellow + self.red
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// East-west road.
    Horizontal,
    /// North-south road.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// East on horizontal roads, north on vertical roads.
    Positive,
    /// West on horizontal roads, south on vertical roads.
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadRef {
    pub axis: Axis,
    pub index: usize,
}

/// A lane: road, travel direction and lane index counted from the centre
/// line outwards (0 is the inner, leftmost lane).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneRef {
    pub axis: Axis,
    pub road: usize,
    pub direction: Direction,
    pub lane: usize,
}

impl LaneRef {
    /// Stable integer id: `axis*1000 + road*100 + direction*10 + lane`.
    pub fn id(&self) -> u32 {
        let axis = match self.axis {
            Axis::Horizontal => 0,
            Axis::Vertical => 1,
        };
        let dir = match self.direction {
            Direction::Positive => 0,
            Direction::Negative => 1,
        };
        axis * 1000 + self.road as u32 * 100 + dir * 10 + self.lane as u32
    }

    pub fn with_lane(&self, lane: usize) -> LaneRef {
        LaneRef { lane, ..*self }
    }

    pub fn carriageway(&self) -> (Axis, usize, Direction) {
        (self.axis, self.road, self.direction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    StoppedVehicle,
    Animal,
}

impl ObstacleKind {
    /// Footprint `(length, width)` in metres.
    pub fn footprint(&self) -> (f64, f64) {
        match self {
            ObstacleKind::StoppedVehicle => (4.5, 2.0),
            ObstacleKind::Animal => (1.5, 0.8),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ObstacleKind::StoppedVehicle => "stopped_vehicle",
            ObstacleKind::Animal => "animal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub kind: ObstacleKind,
    pub lane: LaneRef,
    /// Distance along the lane's direction of travel, metres.
    pub position: f64,
    #[serde(default)]
    pub spawn: f64,
    #[serde(default)]
    pub despawn: Option<f64>,
}

impl ObstacleSpec {
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.spawn && self.despawn.is_none_or(|d| t < d)
    }
}

fn default_ego_position() -> f64 {
    20.0
}
fn default_cruise() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpec {
    #[serde(default = "default_ego_lane")]
    pub lane: LaneRef,
    #[serde(default = "default_ego_position")]
    pub position: f64,
    #[serde(default = "default_cruise")]
    pub cruise_speed: f64,
    /// Ego stays in its lane and queues behind blockages instead of passing.
    #[serde(default)]
    pub hold_lane: bool,
}

fn default_ego_lane() -> LaneRef {
    LaneRef { axis: Axis::Horizontal, road: 0, direction: Direction::Positive, lane: 1 }
}

impl Default for EgoSpec {
    fn default() -> Self {
        EgoSpec {
            lane: default_ego_lane(),
            position: default_ego_position(),
            cruise_speed: default_cruise(),
            hold_lane: false,
        }
    }
}

/// Vehicle dynamics and policy constants shared by every vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    pub length: f64,
    pub width: f64,
    pub cruise_speed: f64,
    /// Relative spread of NPC cruise speeds around `cruise_speed`.
    pub cruise_jitter: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    /// Constant time gap of the car-following rule, seconds.
    pub time_gap: f64,
    /// Standstill gap, metres.
    pub min_gap: f64,
    pub lane_change_duration: f64,
    /// Bumper distance to a blockage at which a lane change is considered.
    pub trigger_distance: f64,
    /// Distance to a stop line within which a light governs a vehicle.
    pub approach_zone: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            length: 4.5,
            width: 2.0,
            cruise_speed: 10.0,
            cruise_jitter: 0.1,
            max_speed: 15.0,
            max_accel: 4.0,
            time_gap: 1.5,
            min_gap: 2.0,
            lane_change_duration: 3.0,
            trigger_distance: 30.0,
            approach_zone: 40.0,
        }
    }
}

impl VehicleParams {
    /// Length of road one parked vehicle needs.
    pub fn slot_length(&self) -> f64 {
        self.length + self.min_gap
    }
}

impl WorldConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: WorldConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("world config is always representable as TOML")
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.tick_rate).round().max(0.0) as usize
    }

    pub fn intersection_count(&self) -> usize {
        self.map.blocks_x * self.map.blocks_y
    }

    pub fn timings_for(&self, intersection: usize) -> LightTimings {
        if self.light_timings.len() == 1 {
            self.light_timings[0]
        } else {
            self.light_timings[intersection]
        }
    }

    pub fn lane_length(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Horizontal => self.map.blocks_x as f64 * self.map.block_length,
            Axis::Vertical => self.map.blocks_y as f64 * self.map.block_length,
        }
    }

    fn check_lane(&self, lane: &LaneRef, what: &str) -> Result<(), SimError> {
        let roads = match lane.axis {
            Axis::Horizontal => self.map.blocks_y,
            Axis::Vertical => self.map.blocks_x,
        };
        if lane.road >= roads || lane.lane >= self.map.lanes_per_direction {
            return Err(SimError::Config(format!("{what}: lane {lane:?} does not exist")));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let m = &self.map;
        if m.blocks_x == 0 || m.blocks_y == 0 || m.blocks_x > 9 || m.blocks_y > 9 {
            return Err(SimError::Map("blocks_x and blocks_y must be in 1..=9".into()));
        }
        if m.lanes_per_direction == 0 || m.lanes_per_direction > 9 {
            return Err(SimError::Map("lanes_per_direction must be in 1..=9".into()));
        }
        if !(m.lane_width > 0.0) {
            return Err(SimError::Map("lane_width must be positive".into()));
        }
        let road_width = 2.0 * m.lanes_per_direction as f64 * m.lane_width;
        if !(m.block_length > road_width + 2.0 * self.vehicle.slot_length()) {
            return Err(SimError::Map(format!(
                "block_length {} too short for a {road_width} m wide road",
                m.block_length
            )));
        }
        if !(self.tick_rate > 0.0) {
            return Err(SimError::Config("tick_rate must be positive".into()));
        }
        if !(self.duration > 0.0) {
            return Err(SimError::Config("duration must be positive".into()));
        }
        if !(self.weather_noise >= 0.0) {
            return Err(SimError::Config("weather_noise must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.violation_rate) {
            return Err(SimError::Config("violation_rate must be in [0, 1]".into()));
        }
        if self.light_timings.len() != 1 && self.light_timings.len() != self.intersection_count() {
            return Err(SimError::Config(format!(
                "light_timings needs 1 or {} entries",
                self.intersection_count()
            )));
        }
        for t in &self.light_timings {
            if !(t.green > 0.0 && t.yellow > 0.0 && t.red > 0.0) {
                return Err(SimError::Config("light timings must be positive".into()));
            }
            if t.red < t.green + t.yellow {
                return Err(SimError::Config(
                    "red must cover the crossing direction's green and yellow".into(),
                ));
            }
        }
        let v = &self.vehicle;
        if !(v.length > 0.0 && v.width > 0.0 && v.max_accel > 0.0 && v.time_gap > 0.0) {
            return Err(SimError::Config("vehicle dimensions and dynamics must be positive".into()));
        }
        if !(v.cruise_speed * (1.0 + v.cruise_jitter) < v.max_speed && self.ego.cruise_speed < v.max_speed) {
            return Err(SimError::Config("cruise speeds must stay below max_speed".into()));
        }
        self.check_lane(&self.ego.lane, "ego")?;
        let len = self.lane_length(self.ego.lane.axis);
        if !(0.0..len).contains(&self.ego.position) {
            return Err(SimError::Config("ego position lies outside its lane".into()));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            self.check_lane(&o.lane, &format!("obstacle {i}"))?;
            if !(0.0..self.lane_length(o.lane.axis)).contains(&o.position) {
                return Err(SimError::Config(format!("obstacle {i} position lies outside its lane")));
            }
        }
        for lane in self.spawn_lanes.iter().flatten() {
            self.check_lane(lane, "spawn lane")?;
        }
        if let Some(roads) = &self.spawn_roads {
            for r in roads {
                self.check_lane(
                    &LaneRef { axis: r.axis, road: r.index, direction: Direction::Positive, lane: 0 },
                    "spawn road",
                )?;
            }
        }
        if self.lead_vehicles > self.npc_count {
            return Err(SimError::Config("lead_vehicles exceeds npc_count".into()));
        }
        Ok(())
    }
}
