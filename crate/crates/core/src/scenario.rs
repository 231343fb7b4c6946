//! Scenario archetypes: signalised intersections with cross traffic, and
//! mid-block obstructions that force collective lane changes.

use serde::Deserialize;

use crate::edl::{train, EvidentialModel, TrainingSchedule};
use crate::eval::Assertion;
use crate::perception::{light_training_set, PerceptionConfig};
use crate::sim::{
    run_scenario, Axis, Direction, LaneRef, MapConfig, ObstacleKind, ObstacleSpec, SimError, WorldConfig,
};
use crate::Error;

pub const INTERSECTION: &str = "intersection";
pub const OBSTRUCTION: &str = "obstruction";
pub const ANIMAL: &str = "obstruction-animal";

fn base(archetype: &str, seed: u64, duration: f64, npc_count: usize) -> WorldConfig {
    WorldConfig {
        archetype: Some(archetype.to_string()),
        seed,
        duration,
        npc_count,
        ..WorldConfig::from_toml("seed = 0\nduration = 1.0\n").expect("minimal config is valid")
    }
}

/// Two signalised intersections on one east-west ring, traffic on every road.
pub fn intersection(seed: u64, npc_count: usize, duration: f64) -> WorldConfig {
    let mut c = base(INTERSECTION, seed, duration, npc_count);
    c.map = MapConfig { blocks_x: 2, ..MapConfig::default() };
    c
}

/// A stopped vehicle blocks the ego lane mid-block. The ego holds its lane
/// and queues behind it while traffic on the same road changes lanes around
/// it; a lead vehicle hides the obstacle at first.
pub fn obstruction(seed: u64, npc_count: usize, duration: f64) -> WorldConfig {
    let mut c = base(OBSTRUCTION, seed, duration, npc_count);
    let lane = LaneRef { axis: Axis::Horizontal, road: 0, direction: Direction::Positive, lane: 1 };
    c.ego.lane = lane;
    c.ego.position = 160.0;
    c.ego.hold_lane = true;
    c.lead_vehicles = 1;
    // The passing lane starts empty so every vehicle swerves where it first
    // meets the queue.
    c.spawn_lanes = Some(vec![lane]);
    c.obstacles.push(ObstacleSpec {
        kind: ObstacleKind::StoppedVehicle,
        lane,
        position: 200.0 - 0.5,
        spawn: 0.0,
        despawn: None,
    });
    c
}

/// An animal stands in the ego lane of a long ring. The ego drives past it
/// once, behind traffic that swerves around it.
pub fn animal(seed: u64, npc_count: usize, duration: f64) -> WorldConfig {
    let mut c = base(ANIMAL, seed, duration, npc_count);
    c.map = MapConfig { blocks_x: 3, ..MapConfig::default() };
    let lane = LaneRef { axis: Axis::Horizontal, road: 0, direction: Direction::Positive, lane: 1 };
    c.ego.lane = lane;
    c.ego.position = 20.0;
    c.lead_vehicles = 3;
    c.spawn_lanes = Some(vec![lane]);
    c.obstacles.push(ObstacleSpec { kind: ObstacleKind::Animal, lane, position: 200.0, spawn: 0.0, despawn: None });
    c
}

/// Worlds the reference light classifier is trained on: light traffic,
/// clear weather.
pub const TRAINING_SEEDS: std::ops::Range<u64> = 1000..1004;

pub fn training_world(seed: u64) -> WorldConfig {
    intersection(seed, 8, 60.0)
}

/// The light classifier every experiment shares, trained with the default
/// schedule on [`TRAINING_SEEDS`].
pub fn reference_light_model() -> Result<EvidentialModel, Error> {
    let mut data = Vec::new();
    for seed in TRAINING_SEEDS {
        let world = training_world(seed);
        data.extend(light_training_set(&run_scenario(&world)?, &PerceptionConfig::for_world(&world)));
    }
    Ok(train(&data, &TrainingSchedule::default())?.model)
}


/// A scenario file: a world config plus `[[assertions]]` tables checked
/// against every report evaluated on the recording.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub world: WorldConfig,
    pub assertions: Vec<Assertion>,
}

#[derive(Deserialize)]
struct AssertionTables {
    #[serde(default)]
    assertions: Vec<Assertion>,
}

/// Blanks the `[[assertions]]` sections so line numbers in errors still
/// refer to the original text.
fn without_assertions(text: &str) -> String {
    let mut inside = false;
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let t = line.trim_start();
        if t.starts_with('[') {
            inside = t.starts_with("[[assertions]]");
        }
        if !inside {
            out.push_str(line);
        }
        out.push('\n');
    }
    out
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, SimError> {
    let tables: AssertionTables = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
    Ok(ScenarioFile { world: WorldConfig::from_toml(&without_assertions(text))?, assertions: tables.assertions })
}
