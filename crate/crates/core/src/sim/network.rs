use std::f64::consts::{FRAC_PI_2, PI};

use super::config::{Axis, Direction, LaneRef, MapConfig};
use super::frame::Approach;
use crate::geometry::Aabb;

/// Static road geometry of a grid town. Every lane is a ring: leaving the map
/// on one edge re-enters it on the opposite edge.
#[derive(Debug, Clone)]
pub struct Network {
    pub map: MapConfig,
    pub width: f64,
    pub height: f64,
    pub intersections: Vec<IntersectionGeom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionGeom {
    pub id: u32,
    /// Index of the north-south road.
    pub vertical_road: usize,
    /// Index of the east-west road.
    pub horizontal_road: usize,
    pub bbox: Aabb,
}

/// An intersection as seen from one lane, in that lane's arc-length coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneCrossing {
    pub intersection: u32,
    pub stop_line: f64,
    pub exit: f64,
}

impl Network {
    pub fn new(map: &MapConfig) -> Self {
        let width = map.blocks_x as f64 * map.block_length;
        let height = map.blocks_y as f64 * map.block_length;
        let half = map.lanes_per_direction as f64 * map.lane_width;
        let mut intersections = Vec::with_capacity(map.blocks_x * map.blocks_y);
        for j in 0..map.blocks_y {
            for i in 0..map.blocks_x {
                let (cx, cy) = ((i as f64 + 0.5) * map.block_length, (j as f64 + 0.5) * map.block_length);
                intersections.push(IntersectionGeom {
                    id: (j * map.blocks_x + i) as u32,
                    vertical_road: i,
                    horizontal_road: j,
                    bbox: Aabb::new(cx - half, cy - half, cx + half, cy + half),
                });
            }
        }
        Network { map: map.clone(), width, height, intersections }
    }

    pub fn road_half_width(&self) -> f64 {
        self.map.lanes_per_direction as f64 * self.map.lane_width
    }

    pub fn lane_length(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Horizontal => self.width,
            Axis::Vertical => self.height,
        }
    }

    pub fn road_center(&self, axis: Axis, road: usize) -> f64 {
        let _ = axis;
        (road as f64 + 0.5) * self.map.block_length
    }

    pub fn base_heading(axis: Axis, dir: Direction) -> f64 {
        match (axis, dir) {
            (Axis::Horizontal, Direction::Positive) => 0.0,
            (Axis::Horizontal, Direction::Negative) => PI,
            (Axis::Vertical, Direction::Positive) => FRAC_PI_2,
            (Axis::Vertical, Direction::Negative) => -FRAC_PI_2,
        }
    }

    pub fn approach(axis: Axis, dir: Direction) -> Approach {
        match (axis, dir) {
            (Axis::Horizontal, Direction::Positive) => Approach::Eastbound,
            (Axis::Horizontal, Direction::Negative) => Approach::Westbound,
            (Axis::Vertical, Direction::Positive) => Approach::Northbound,
            (Axis::Vertical, Direction::Negative) => Approach::Southbound,
        }
    }

    /// World pose `(x, y, heading)` of a point at arc length `s` and continuous
    /// lane coordinate `lat` (lane index; grows to the right of travel).
    pub fn pose(&self, lane: &LaneRef, s: f64, lat: f64) -> (f64, f64, f64) {
        let w = self.map.lane_width;
        let off = (lat + 0.5) * w;
        let c = self.road_center(lane.axis, lane.road);
        let heading = Self::base_heading(lane.axis, lane.direction);
        match (lane.axis, lane.direction) {
            (Axis::Horizontal, Direction::Positive) => (s, c - off, heading),
            (Axis::Horizontal, Direction::Negative) => (self.width - s, c + off, heading),
            (Axis::Vertical, Direction::Positive) => (c + off, s, heading),
            (Axis::Vertical, Direction::Negative) => (c - off, self.height - s, heading),
        }
    }

    /// Intersections crossed by a lane, ordered by stop-line position.
    pub fn crossings(&self, lane: &LaneRef) -> Vec<LaneCrossing> {
        let half = self.road_half_width();
        let len = self.lane_length(lane.axis);
        let mut out: Vec<LaneCrossing> = self
            .intersections
            .iter()
            .filter(|g| match lane.axis {
                Axis::Horizontal => g.horizontal_road == lane.road,
                Axis::Vertical => g.vertical_road == lane.road,
            })
            .map(|g| {
                let (cx, cy) = g.bbox.center();
                let along = match lane.axis {
                    Axis::Horizontal => cx,
                    Axis::Vertical => cy,
                };
                let sc = match lane.direction {
                    Direction::Positive => along,
                    Direction::Negative => len - along,
                };
                LaneCrossing { intersection: g.id, stop_line: sc - half, exit: sc + half }
            })
            .collect();
        out.sort_by(|a, b| a.stop_line.total_cmp(&b.stop_line));
        out
    }

    pub fn is_on_road(&self, x: f64, y: f64) -> bool {
        let half = self.road_half_width();
        (0..self.map.blocks_y).any(|j| (y - self.road_center(Axis::Horizontal, j)).abs() <= half)
            || (0..self.map.blocks_x).any(|i| (x - self.road_center(Axis::Vertical, i)).abs() <= half)
    }

    /// Whether `(x, y)` lies within `tol` of a painted line (centre line or a
    /// separator between same-direction lanes).
    pub fn is_lane_marking(&self, x: f64, y: f64, tol: f64) -> bool {
        if self.intersections.iter().any(|g| g.bbox.contains(x, y)) {
            return false;
        }
        let w = self.map.lane_width;
        let lanes = self.map.lanes_per_direction as i64;
        let near_line = |offset: f64| {
            let k = (offset / w).round();
            k.abs() < lanes as f64 && (offset - k * w).abs() <= tol
        };
        let half = self.road_half_width();
        (0..self.map.blocks_y).any(|j| {
            let off = y - self.road_center(Axis::Horizontal, j);
            off.abs() <= half && near_line(off)
        }) || (0..self.map.blocks_x).any(|i| {
            let off = x - self.road_center(Axis::Vertical, i);
            off.abs() <= half && near_line(off)
        })
    }
}
