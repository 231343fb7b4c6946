use crate::geometry::{angle_diff, to_local, Aabb};
use crate::sim::Approach;

use super::{BehaviorCategory, BehaviorError, BehaviorEvent, TrackPoint};

/// Accumulated heading change inside an intersection that counts as a turn.
const TURN_ANGLE: f64 = std::f64::consts::PI / 3.0;
/// Lateral speed marking the onset and end of a lane change, m/s.
const LATERAL_ONSET: f64 = 0.2;
/// Fraction of a lane width a lane change must cover.
const LATERAL_FRACTION: f64 = 0.8;

/// Pattern-matching labeller. Intersection traversals become turns or
/// `Straight`; lane-id changes with enough lateral travel become lane changes
/// spanning the frames where lateral speed exceeds the onset threshold;
/// everything else is `LaneFollow`. Events partition the track.
pub fn label_behavior(
    vehicle: u32,
    track: &[TrackPoint],
    intersections: &[Aabb],
    lane_width: f64,
) -> Result<Vec<BehaviorEvent>, BehaviorError> {
    if track.len() < 2 {
        return Err(BehaviorError::ShortTrack { vehicle, frames: track.len() });
    }
    let n = track.len();
    let inside: Vec<bool> = track.iter().map(|p| intersections.iter().any(|b| b.contains(p.x, p.y))).collect();
    let mut labels = vec![BehaviorCategory::LaneFollow; n];

    // Lateral coordinate and speed relative to the initial cardinal direction.
    let axis = Approach::from_heading(track[0].heading).heading();
    let lateral: Vec<f64> = track.iter().map(|p| to_local(p.x - track[0].x, p.y - track[0].y, axis).1).collect();
    let lat_speed: Vec<f64> = track.iter().map(|p| to_local(p.vx, p.vy, axis).1).collect();
    for k in 1..n {
        if track[k].lane_id == track[k - 1].lane_id || inside[k] || inside[k - 1] {
            continue;
        }
        let mut start = k;
        while start > 0 && lat_speed[start - 1].abs() > LATERAL_ONSET && !inside[start - 1] {
            start -= 1;
        }
        let mut end = k;
        while end + 1 < n && lat_speed[end + 1].abs() > LATERAL_ONSET && !inside[end + 1] {
            end += 1;
        }
        let before = lateral[start.saturating_sub(1)];
        let after = lateral[(end + 1).min(n - 1)];
        let shift = after - before;
        if shift.abs() < LATERAL_FRACTION * lane_width {
            continue;
        }
        let cat = if shift > 0.0 { BehaviorCategory::ChangeLaneLeft } else { BehaviorCategory::ChangeLaneRight };
        labels[start..=end].fill(cat);
    }

    let mut k = 0;
    while k < n {
        if !inside[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < n && inside[k] {
            k += 1;
        }
        let turned: f64 = (start + 1..k).map(|j| angle_diff(track[j - 1].heading, track[j].heading)).sum();
        let cat = if turned >= TURN_ANGLE {
            BehaviorCategory::TurnLeft
        } else if turned <= -TURN_ANGLE {
            BehaviorCategory::TurnRight
        } else {
            BehaviorCategory::Straight
        };
        labels[start..k].fill(cat);
    }

    let mut events = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || labels[k] != labels[start] {
            let (a, b) = (&track[start], &track[k - 1]);
            events.push(BehaviorEvent {
                vehicle,
                category: labels[start],
                start_frame: a.frame,
                end_frame: b.frame,
                start_time: a.time,
                end_time: b.time,
                start_x: a.x,
                start_y: a.y,
                heading: a.heading,
            });
            start = k;
        }
    }
    Ok(events)
}
