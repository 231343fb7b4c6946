//! Deterministic grid-town traffic simulator.

mod config;
mod frame;
mod network;
mod truth;
mod world;

pub use config::{
    Axis, Direction, EgoSpec, LaneRef, LightTimings, MapConfig, ObstacleKind, ObstacleSpec, RoadRef, VehicleParams,
    WorldConfig,
};
pub use frame::{Approach, Frame, IntersectionBox, LightColor, LightState, ObstacleState, VehicleState};
pub use network::{IntersectionGeom, LaneCrossing, Network};
pub use truth::{
    approach_of, governing_light, ground_truth_light_for, ground_truth_light_with, ground_truth_obstacle_ahead, ApproachInfo,
    OBSTACLE_LOOKAHEAD,
};
pub use world::{lane_capacity, LaneState, World, EGO_ID};

/// Speed below which a vehicle counts as stopped, m/s.
pub const STOPPED_SPEED: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid map: {0}")]
    Map(String),
    #[error("{requested} vehicles requested but only {capacity} lane slots are free")]
    Capacity { requested: usize, capacity: usize },
    #[error("unknown vehicle id {0}")]
    UnknownVehicle(u32),
}

pub fn build_world(config: WorldConfig) -> Result<World, SimError> {
    World::build(config)
}

pub fn step(world: &mut World) -> Frame {
    world.step()
}

/// Runs a scenario to completion: `duration * tick_rate` frames, the first
/// being the initial state.
pub fn run_scenario(config: &WorldConfig) -> Result<Vec<Frame>, SimError> {
    let n = config.frame_count();
    let mut world = World::build(config.clone())?;
    let mut frames = Vec::with_capacity(n);
    if n > 0 {
        frames.push(world.frame());
    }
    while frames.len() < n {
        frames.push(world.step());
    }
    Ok(frames)
}
