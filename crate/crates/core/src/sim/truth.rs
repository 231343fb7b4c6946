use super::frame::{Approach, Frame, LightColor, VehicleState};
use super::SimError;
use crate::geometry::to_local;

/// Lookahead for the obstacle-ahead ground truth, metres.
pub const OBSTACLE_LOOKAHEAD: f64 = 50.0;
const DEFAULT_APPROACH_ZONE: f64 = 40.0;
/// Bumper gap up to which consecutive vehicles count as one queue.
const QUEUE_GAP: f64 = 10.0;

/// The intersection a vehicle is heading into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachInfo {
    pub intersection: u32,
    pub approach: Approach,
    /// Distance from the vehicle's front bumper to the intersection box edge.
    pub distance: f64,
}

fn half_length(v: &VehicleState) -> f64 {
    let (c, s) = (v.heading.cos().abs(), v.heading.sin().abs());
    if c >= s {
        v.bbox.width() / 2.0
    } else {
        v.bbox.height() / 2.0
    }
}

/// Nearest intersection box ahead of the vehicle that its lateral position
/// lines up with. Vehicles already inside a box have no approach.
pub fn approach_of(frame: &Frame, v: &VehicleState) -> Option<ApproachInfo> {
    let approach = Approach::from_heading(v.heading);
    let front = half_length(v);
    frame
        .intersections
        .iter()
        .filter_map(|b| {
            let bb = &b.bbox;
            let (aligned, distance) = match approach {
                Approach::Eastbound => (bb.c1y <= v.y && v.y <= bb.c2y, bb.c1x - (v.x + front)),
                Approach::Westbound => (bb.c1y <= v.y && v.y <= bb.c2y, (v.x - front) - bb.c2x),
                Approach::Northbound => (bb.c1x <= v.x && v.x <= bb.c2x, bb.c1y - (v.y + front)),
                Approach::Southbound => (bb.c1x <= v.x && v.x <= bb.c2x, (v.y - front) - bb.c2y),
            };
            (aligned && distance >= -1e-9 && !bb.contains(v.x, v.y)).then_some(ApproachInfo {
                intersection: b.id,
                approach,
                distance: distance.max(0.0),
            })
        })
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
}

/// Red-impacting ground truth with the default 40 m approach zone.
pub fn ground_truth_light_for(frame: &Frame, vehicle_id: u32) -> Result<bool, SimError> {
    ground_truth_light_with(frame, vehicle_id, DEFAULT_APPROACH_ZONE)
}

/// True when the light governing the vehicle's approach is red or yellow and
/// the vehicle is within `zone` metres of it. A vehicle queued further back
/// takes the state of the first vehicle of its queue.
pub fn ground_truth_light_with(frame: &Frame, vehicle_id: u32, zone: f64) -> Result<bool, SimError> {
    Ok(governing_light(frame, vehicle_id, zone)?.is_some_and(|(_, c)| c.is_red_impacting()))
}

/// The light that currently governs a vehicle: its approach light when the
/// vehicle, or the first vehicle of its queue, is within `zone` metres.
pub fn governing_light(frame: &Frame, vehicle_id: u32, zone: f64) -> Result<Option<(ApproachInfo, LightColor)>, SimError> {
    let v = frame.vehicle(vehicle_id).ok_or(SimError::UnknownVehicle(vehicle_id))?;
    let Some(own) = approach_of(frame, v) else {
        return Ok(None);
    };
    let head = queue_head(frame, v, &own);
    let head_approach = if head.id == v.id { own } else { approach_of(frame, head).unwrap_or(own) };
    if head_approach.intersection != own.intersection || head_approach.distance > zone {
        return Ok(None);
    }
    Ok(frame.light(own.intersection, own.approach).map(|c| (own, c)))
}

/// Walks forward through same-lane vehicles separated by small gaps.
fn queue_head<'a>(frame: &'a Frame, v: &'a VehicleState, own: &ApproachInfo) -> &'a VehicleState {
    let heading = own.approach.heading();
    let mut cur = v;
    loop {
        let next = frame
            .vehicles
            .iter()
            .filter(|o| o.id != cur.id && o.lane_id == cur.lane_id)
            .filter_map(|o| {
                let (lon, _) = to_local(o.x - cur.x, o.y - cur.y, heading);
                let gap = lon - half_length(cur) - half_length(o);
                (lon > 0.0 && gap <= QUEUE_GAP).then_some((lon, o))
            })
            .filter(|(_, o)| approach_of(frame, o).is_some_and(|a| a.intersection == own.intersection))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match next {
            Some((_, o)) => cur = o,
            None => return cur,
        }
    }
}

/// Nearest active obstacle in the ego lane within [`OBSTACLE_LOOKAHEAD`]
/// metres ahead of the ego, centre to centre.
pub fn ground_truth_obstacle_ahead(frame: &Frame) -> Option<u32> {
    let ego = frame.ego();
    let heading = Approach::from_heading(ego.heading).heading();
    frame
        .obstacles
        .iter()
        .filter(|o| o.lane_id == ego.lane_id)
        .filter_map(|o| {
            let (lon, _) = to_local(o.x - ego.x, o.y - ego.y, heading);
            (lon > 0.0 && lon <= OBSTACLE_LOOKAHEAD).then_some((lon, o.id))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, id)| id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use crate::sim::frame::{IntersectionBox, LightState, ObstacleState};
    use crate::sim::ObstacleKind;

    fn car(id: u32, x: f64, speed: f64) -> VehicleState {
        VehicleState {
            id,
            x,
            y: 96.5,
            heading: 0.0,
            vx: speed,
            vy: 0.0,
            lane_id: 1,
            bbox: Aabb::oriented(x, 96.5, 0.0, 4.5, 2.0),
        }
    }

    fn frame(vehicles: Vec<VehicleState>, color: LightColor) -> Frame {
        let mut lights = Vec::new();
        for a in [Approach::Eastbound, Approach::Westbound] {
            lights.push(LightState { intersection: 0, approach: a, state: color });
        }
        let cross = if color == LightColor::Green { LightColor::Red } else { LightColor::Green };
        for a in [Approach::Northbound, Approach::Southbound] {
            lights.push(LightState { intersection: 0, approach: a, state: cross });
        }
        Frame {
            index: 0,
            time: 0.0,
            vehicles,
            lights,
            intersections: vec![IntersectionBox { id: 0, bbox: Aabb::new(93.0, 93.0, 107.0, 107.0) }],
            obstacles: vec![],
            ego_id: 0,
        }
    }

    #[test]
    fn mid_block_ego_has_no_light() {
        let f = frame(vec![car(0, 20.0, 10.0)], LightColor::Red);
        assert!(!ground_truth_light_for(&f, 0).unwrap());
    }

    #[test]
    fn queued_third_inherits_red() {
        // Head at the line, ego third in the queue and beyond the zone itself.
        let f = frame(vec![car(1, 90.0, 0.0), car(2, 83.0, 0.0), car(0, 76.0, 0.0)], LightColor::Red);
        assert!(ground_truth_light_for(&f, 0).unwrap());
        let f = frame(vec![car(1, 90.0, 0.0), car(2, 60.0, 0.0), car(0, 53.0, 0.0)], LightColor::Red);
        assert!(!ground_truth_light_with(&f, 0, 20.0).unwrap());
        let f = frame(vec![car(1, 90.0, 0.0), car(2, 83.0, 0.0), car(0, 60.0, 0.0)], LightColor::Red);
        assert!(!ground_truth_light_with(&f, 0, 20.0).unwrap());
        let f = frame(vec![car(1, 90.0, 0.0), car(2, 75.0, 0.0), car(0, 65.0, 0.0)], LightColor::Red);
        assert!(ground_truth_light_with(&f, 0, 20.0).unwrap());
    }

    #[test]
    fn green_and_yellow() {
        let f = frame(vec![car(0, 80.0, 5.0)], LightColor::Green);
        assert!(!ground_truth_light_for(&f, 0).unwrap());
        let f = frame(vec![car(0, 80.0, 5.0)], LightColor::Yellow);
        assert!(ground_truth_light_for(&f, 0).unwrap());
    }

    #[test]
    fn inside_box_has_no_light() {
        let f = frame(vec![car(0, 100.0, 5.0)], LightColor::Red);
        assert!(!ground_truth_light_for(&f, 0).unwrap());
    }

    #[test]
    fn unknown_vehicle() {
        let f = frame(vec![car(0, 20.0, 10.0)], LightColor::Red);
        assert!(matches!(ground_truth_light_for(&f, 9), Err(SimError::UnknownVehicle(9))));
    }

    fn obstacle(id: u32, x: f64, lane_id: u32) -> ObstacleState {
        ObstacleState { id, kind: ObstacleKind::StoppedVehicle, lane_id, x, y: 96.5, bbox: Aabb::oriented(x, 96.5, 0.0, 4.5, 2.0) }
    }

    #[test]
    fn obstacle_ahead_ordering() {
        let mut f = frame(vec![car(0, 20.0, 10.0)], LightColor::Green);
        assert_eq!(ground_truth_obstacle_ahead(&f), None);
        f.obstacles = vec![obstacle(0, 40.0, 1)];
        assert_eq!(ground_truth_obstacle_ahead(&f), Some(0));
        f.obstacles = vec![obstacle(0, 40.0, 0)];
        assert_eq!(ground_truth_obstacle_ahead(&f), None);
        f.obstacles = vec![obstacle(0, 60.0, 1), obstacle(1, 35.0, 1)];
        assert_eq!(ground_truth_obstacle_ahead(&f), Some(1));
        f.obstacles = vec![obstacle(0, 10.0, 1), obstacle(1, 80.0, 1)];
        assert_eq!(ground_truth_obstacle_ahead(&f), None);
    }
}
