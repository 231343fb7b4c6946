use crate::geometry::{angle_diff, to_local, Aabb};
use crate::perception::{DetectedVehicle, Observation};
use crate::rules::{Fact, Value};
use crate::sim::Approach;

use super::{BehaviorSnapshot, BridgeConfig, BridgeError, FactBase, FrameContext, MapGeometry};

fn real(x: f64) -> Value {
    Value::real(x)
}

fn box_args(b: &Aabb) -> [Value; 4] {
    [real(b.c1x), real(b.c1y), real(b.c2x), real(b.c2y)]
}

/// Extent of a box in the ego frame: (lon_min, lon_max, lat_min, lat_max).
fn local_extent(b: &Aabb, ox: f64, oy: f64, heading: f64) -> (f64, f64, f64, f64) {
    let mut ext = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in [(b.c1x, b.c1y), (b.c1x, b.c2y), (b.c2x, b.c1y), (b.c2x, b.c2y)] {
        let (lon, lat) = to_local(x - ox, y - oy, heading);
        ext.0 = ext.0.min(lon);
        ext.1 = ext.1.max(lon);
        ext.2 = ext.2.min(lat);
        ext.3 = ext.3.max(lat);
    }
    ext
}

fn half_length(v: &DetectedVehicle, heading: f64) -> f64 {
    let (lo, hi, _, _) = local_extent(&v.bbox, v.x, v.y, heading);
    (hi - lo) / 2.0
}

/// Where the blockage behind a lane-change cluster would be: the cluster box
/// stretched `reach` metres along its cardinal heading and widened by half a
/// lane on either side.
pub(crate) fn cluster_region(b: &Aabb, heading: f64, reach: f64, lane_width: f64) -> Aabb {
    let h = Approach::from_heading(heading).heading();
    let (dx, dy) = (h.cos().round(), h.sin().round());
    let shifted = Aabb::new(b.c1x + reach * dx, b.c1y + reach * dy, b.c2x + reach * dx, b.c2y + reach * dy);
    let hull = Aabb::new(
        b.c1x.min(shifted.c1x),
        b.c1y.min(shifted.c1y),
        b.c2x.max(shifted.c2x),
        b.c2y.max(shifted.c2y),
    );
    let m = lane_width / 2.0;
    if dx != 0.0 {
        Aabb::new(hull.c1x, hull.c1y - m, hull.c2x, hull.c2y + m)
    } else {
        Aabb::new(hull.c1x - m, hull.c1y, hull.c2x + m, hull.c2y)
    }
}

/// Builds the fact base of one frame. Geometry the rule language cannot
/// express is precomputed into helper facts.
pub fn facts_from_frame(
    obs: &Observation,
    behavior: &BehaviorSnapshot,
    ctx: &FrameContext,
    map: &MapGeometry,
    cfg: &BridgeConfig,
) -> Result<FactBase, BridgeError> {
    if behavior.frame != obs.frame {
        return Err(BridgeError::FrameMismatch { observation: obs.frame, behavior: behavior.frame });
    }
    let ego = obs.vehicles.iter().find(|v| v.id == ctx.ego_id).ok_or(BridgeError::MissingEgo(ctx.ego_id))?;
    let f = Value::from(obs.frame);
    let mut facts = Vec::new();
    let mut push = |pred: &str, args: Vec<Value>| facts.push(Fact::new(pred, args));
    let fa = |rest: &[Value]| -> Vec<Value> { std::iter::once(f.clone()).chain(rest.iter().cloned()).collect() };

    push("frame", fa(&[]));
    push("driver_location", fa(&[real(ego.x), real(ego.y)]));
    push("driver_rotation", fa(&[real(ego.heading)]));
    let p = obs.light_prediction.probabilities();
    push("light_belief", fa(&[real(p[crate::perception::RED]), real(obs.light_prediction.strength())]));
    if obs.light_red() {
        push("light_detected", fa(&[]));
    }
    push(
        "bev_uncertainty",
        fa(&[real(obs.bev.mean_epistemic), real(obs.bev.epistemic_ahead), Value::from(obs.bev.uncertain_cells as u64)]),
    );
    push("grace_period", vec![real(cfg.grace_period)]);
    if let Some(s) = ctx.since_green {
        push("since_green", fa(&[real(s)]));
    }

    let h = Approach::from_heading(ego.heading).heading();
    let ego_half = half_length(ego, h);
    let half_lane = map.lane_width / 2.0;

    let mut ahead = Vec::new();
    for (id, b) in &map.intersections {
        if b.distance_to_point(ego.x, ego.y) > cfg.intersection_range {
            continue;
        }
        let [a, bb, c, d] = box_args(b);
        push("intersection", fa(&[Value::from(*id), a, bb, c, d]));
        let (lon_min, _, lat_min, lat_max) = local_extent(b, ego.x, ego.y, h);
        if lat_min <= 0.0 && 0.0 <= lat_max && lon_min > 0.0 && lon_min - ego_half <= cfg.nearby_radius {
            push("nearby_intersection", fa(&[Value::from(*id)]));
            ahead.push((*id, lon_min));
        }
    }

    for v in obs.vehicles.iter().filter(|v| v.id != ctx.ego_id) {
        let action = behavior.actions.get(&v.id).map_or("unknown", |c| c.as_str());
        let [a, b, c, d] = box_args(&v.bbox);
        push(
            "vehicle",
            fa(&[Value::from(v.id), Value::sym(action), real(v.vx), real(v.vy), real(v.heading), a, b, c, d]),
        );
        let id = Value::from(v.id);
        if v.vx.hypot(v.vy) < cfg.stopped_speed {
            push("stopped", fa(std::slice::from_ref(&id)));
        }
        let (lon, lat) = to_local(v.x - ego.x, v.y - ego.y, h);
        let aligned = angle_diff(ego.heading, v.heading).abs() <= cfg.front_heading_tolerance.to_radians();
        if lon > 0.0 && lon <= cfg.front_distance && lat.abs() <= half_lane && aligned {
            push("in_front", fa(std::slice::from_ref(&id)));
        }
        for (iid, near_edge) in &ahead {
            if lon < *near_edge {
                push("approaching", fa(&[id.clone(), Value::from(*iid)]));
            }
        }
    }

    for o in &obs.obstacles {
        let [a, b, c, d] = box_args(&o.bbox);
        push("obstacle_detected", fa(&[Value::from(o.id), Value::sym(o.kind.as_str()), a, b, c, d]));
    }

    let tol = cfg.crossing_tolerance.to_radians();
    for c in &behavior.clusters {
        let cid = Value::from(c.id as u64);
        push(
            "behavior_cluster",
            fa(&[
                cid.clone(),
                Value::sym(c.category.as_str()),
                Value::from(c.frame_start),
                Value::from(c.frame_end),
                Value::from(c.ego_member),
            ]),
        );
        for (iid, b) in &map.intersections {
            if b.distance_to_point(ego.x, ego.y) <= cfg.intersection_range
                && b.distance_to_box(&c.bbox) <= cfg.cluster_intersection_margin
            {
                push("cluster_at_intersection", fa(&[cid.clone(), Value::from(*iid)]));
            }
        }
        let rel = angle_diff(h, c.heading).abs();
        if (rel - std::f64::consts::FRAC_PI_2).abs() <= tol {
            push("cluster_crossing", fa(std::slice::from_ref(&cid)));
        } else if rel <= tol {
            push("cluster_codirectional", fa(std::slice::from_ref(&cid)));
        }
    }

    for ch in &behavior.changes {
        let bx = box_args(&ch.bbox);
        let mut args = vec![
            Value::from(ch.frame_start),
            Value::from(ch.frame_end),
            Value::sym(ch.action.as_str()),
            Value::from(ch.ego),
        ];
        args.extend(bx.iter().cloned());
        push("change_action_cluster", args);
        if map.intersections.iter().any(|(_, b)| b.distance_to_box(&ch.bbox) <= cfg.intersection_exception_radius) {
            push("intersection_near_box", bx.to_vec());
        }
        let region = cluster_region(&ch.bbox, ch.heading, cfg.obstacle_reach, map.lane_width);
        let mut r = bx.to_vec();
        r.extend(box_args(&region));
        push("cluster_region", r);
        if obs.obstacles.iter().any(|o| o.bbox.overlaps(&region)) {
            push("obstacle_near_box", bx.to_vec());
        }
    }

    facts.sort();
    facts.dedup();
    Ok(FactBase { frame: obs.frame, facts })
}
