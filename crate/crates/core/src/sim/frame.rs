use serde::{Deserialize, Serialize};

use super::config::ObstacleKind;
use crate::geometry::Aabb;

/// Ground-truth snapshot of the world at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub index: u64,
    pub time: f64,
    pub vehicles: Vec<VehicleState>,
    pub lights: Vec<LightState>,
    pub intersections: Vec<IntersectionBox>,
    pub obstacles: Vec<ObstacleState>,
    pub ego_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Radians, counter-clockwise from +x.
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub lane_id: u32,
    #[serde(flatten)]
    pub bbox: Aabb,
}

impl VehicleState {
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Eastbound,
    Westbound,
    Northbound,
    Southbound,
}

impl Approach {
    /// Nearest cardinal travel direction for a heading.
    pub fn from_heading(heading: f64) -> Approach {
        let k = (heading / std::f64::consts::FRAC_PI_2).round().rem_euclid(4.0) as i32;
        match k {
            0 => Approach::Eastbound,
            1 => Approach::Northbound,
            2 => Approach::Westbound,
            _ => Approach::Southbound,
        }
    }

    pub fn heading(&self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            Approach::Eastbound => 0.0,
            Approach::Northbound => FRAC_PI_2,
            Approach::Westbound => PI,
            Approach::Southbound => -FRAC_PI_2,
        }
    }

    pub fn is_east_west(&self) -> bool {
        matches!(self, Approach::Eastbound | Approach::Westbound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightColor {
    Red,
    Yellow,
    Green,
}

impl LightColor {
    /// Yellow counts as red: the vehicle is expected to stop.
    pub fn is_red_impacting(&self) -> bool {
        !matches!(self, LightColor::Green)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightState {
    pub intersection: u32,
    pub approach: Approach,
    pub state: LightColor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionBox {
    pub id: u32,
    #[serde(flatten)]
    pub bbox: Aabb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleState {
    pub id: u32,
    pub kind: ObstacleKind,
    pub lane_id: u32,
    pub x: f64,
    pub y: f64,
    #[serde(flatten)]
    pub bbox: Aabb,
}

impl Frame {
    pub fn vehicle(&self, id: u32) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn ego(&self) -> &VehicleState {
        self.vehicle(self.ego_id).expect("frame invariant: ego present")
    }

    pub fn light(&self, intersection: u32, approach: Approach) -> Option<LightColor> {
        self.lights
            .iter()
            .find(|l| l.intersection == intersection && l.approach == approach)
            .map(|l| l.state)
    }
}
