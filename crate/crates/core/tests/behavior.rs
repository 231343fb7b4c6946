mod common;

use common::dbscan::dbscan_oracle;
use csav_core::behavior::{
    cluster_behaviors, dbscan, detect_action_changes, label_behavior, label_recording, tracks_from_frames,
    BehaviorCategory, BehaviorEvent, ClusteringConfig, TrackPoint,
};
use csav_core::geometry::Aabb;
use csav_core::sim::{build_world, Axis, Direction, LaneRef, ObstacleKind, ObstacleSpec, WorldConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn dbscan_matches_brute_force_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for set in 0..200 {
        let n = rng.random_range(0..=200);
        let spread = rng.random_range(5.0..80.0);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..spread), rng.random_range(0.0..spread))).collect();
        for eps in [0.5, 2.7, 10.0] {
            for min_size in [1, 2, 4] {
                assert_eq!(dbscan(&pts, eps, min_size), dbscan_oracle(&pts, eps, min_size), "set {set} eps {eps} min {min_size}");
            }
        }
    }
}

proptest! {
    #[test]
    fn dbscan_is_translation_invariant(
        pts in prop::collection::vec((0.0f64..30.0, 0.0f64..30.0), 0..60),
        dx in -1e3f64..1e3, dy in -1e3f64..1e3,
    ) {
        // Exact binary fractions keep the shifted distances bit-identical.
        let q = |v: f64| (v * 8.0).round() / 8.0;
        let pts: Vec<(f64, f64)> = pts.into_iter().map(|(x, y)| (q(x), q(y))).collect();
        let shifted: Vec<(f64, f64)> = pts.iter().map(|(x, y)| (x + q(dx), y + q(dy))).collect();
        prop_assert_eq!(dbscan(&pts, 2.7, 2), dbscan(&shifted, 2.7, 2));
    }
}

fn point(frame: u64, x: f64, y: f64, heading: f64, vx: f64, vy: f64, lane_id: u32) -> TrackPoint {
    TrackPoint { frame, time: frame as f64 / 10.0, x, y, heading, vx, vy, lane_id }
}

#[test]
fn straight_cruise_is_one_lane_follow_event() {
    let track: Vec<TrackPoint> = (0..50).map(|k| point(k, k as f64, 0.0, 0.0, 10.0, 0.0, 3)).collect();
    let events = label_behavior(1, &track, &[], 3.5).unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].category, BehaviorCategory::LaneFollow);
    assert_eq!((events[0].start_frame, events[0].end_frame), (0, 49));
    assert!(label_behavior(1, &track[..1], &[], 3.5).is_err());
}

#[test]
fn quarter_turn_inside_intersection_is_turn_left() {
    let boxes = [Aabb::new(10.0, -5.0, 20.0, 5.0)];
    let mut track = Vec::new();
    for k in 0..40u64 {
        let t = k as f64;
        let (x, y, h) = if t < 12.0 {
            (t, 0.0, 0.0)
        } else if t < 22.0 {
            let a = (t - 12.0) / 10.0 * std::f64::consts::FRAC_PI_2;
            (12.0 + 4.0 * a.sin(), 4.0 * (1.0 - a.cos()), a)
        } else {
            (16.0, 4.0 + (t - 22.0), std::f64::consts::FRAC_PI_2)
        };
        track.push(point(k, x, y, h, h.cos(), h.sin(), 0));
    }
    let events = label_behavior(2, &track, &boxes, 3.5).unwrap();
    let cats: Vec<_> = events.iter().map(|e| e.category).collect();
    assert!(cats.contains(&BehaviorCategory::TurnLeft), "{cats:?}");
    let turn = events.iter().find(|e| e.category == BehaviorCategory::TurnLeft).unwrap();
    assert!(boxes[0].contains(turn.start_x, turn.start_y));
    let mirrored: Vec<TrackPoint> =
        track.iter().map(|p| TrackPoint { y: -p.y, heading: -p.heading, vy: -p.vy, ..*p }).collect();
    let mirrored_box = [Aabb::new(10.0, -5.0, 20.0, 5.0)];
    let cats: Vec<_> = label_behavior(2, &mirrored, &mirrored_box, 3.5).unwrap().iter().map(|e| e.category).collect();
    assert!(cats.contains(&BehaviorCategory::TurnRight));
}

#[test]
fn lane_change_onset_is_first_frame_over_lateral_threshold() {
    let w = 3.5;
    let dur = 3.0;
    let mut track = Vec::new();
    for k in 0..80u64 {
        let t = k as f64 / 10.0;
        let u = ((t - 2.0) / dur).clamp(0.0, 1.0);
        // Smooth step in lateral position: y = w (3u^2 - 2u^3).
        let y = w * (3.0 * u * u - 2.0 * u.powi(3));
        let vy = if t > 2.0 && t < 2.0 + dur { w * 6.0 * u * (1.0 - u) / dur } else { 0.0 };
        let lane = if y > w / 2.0 { 0 } else { 1 };
        track.push(point(k, 10.0 * t, y, vy.atan2(10.0), 10.0, vy, lane));
    }
    let onset = track.iter().position(|p| p.vy.abs() > 0.2).unwrap() as u64;
    let events = label_behavior(3, &track, &[], w).unwrap();
    let lc = events.iter().find(|e| e.category == BehaviorCategory::ChangeLaneLeft).expect("lane change labelled");
    assert_eq!(lc.start_frame, onset);
    assert_eq!(lc.start_y, track[onset as usize].y);
}

fn obstruction_world(seed: u64) -> WorldConfig {
    let mut c = WorldConfig::from_toml(&format!("seed = {seed}\nduration = 60.0\nnpc_count = 12\n")).unwrap();
    c.map.blocks_x = 2;
    for (lane, pos) in [(1, 190.0), (0, 240.0)] {
        c.obstacles.push(ObstacleSpec {
            kind: ObstacleKind::StoppedVehicle,
            lane: LaneRef { axis: Axis::Horizontal, road: 0, direction: Direction::Positive, lane },
            position: pos,
            spawn: 0.0,
            despawn: None,
        });
    }
    c
}

#[test]
fn events_partition_every_track() {
    for seed in 0..3 {
        let c = obstruction_world(seed);
        let frames = csav_core::sim::run_scenario(&c).unwrap();
        let events = label_recording(&frames, c.map.lane_width);
        for (id, track) in tracks_from_frames(&frames) {
            let mut mine: Vec<&BehaviorEvent> = events.iter().filter(|e| e.vehicle == id).collect();
            mine.sort_by_key(|e| e.start_frame);
            assert_eq!(mine[0].start_frame, track[0].frame);
            assert_eq!(mine.last().unwrap().end_frame, track.last().unwrap().frame);
            for w in mine.windows(2) {
                assert_eq!(w[0].end_frame + 1, w[1].start_frame);
                assert_ne!(w[0].category, w[1].category);
            }
        }
    }
}

#[test]
fn labels_agree_with_policy_on_maneuver_frames() {
    let (mut agree, mut total) = (0usize, 0usize);
    for seed in 0..3 {
        let c = obstruction_world(seed);
        let mut world = build_world(c.clone()).unwrap();
        let mut frames = vec![world.frame()];
        let mut changing = vec![world.lane_states().iter().map(|s| s.changing_lanes).collect::<Vec<_>>()];
        for _ in 1..c.frame_count() {
            frames.push(world.step());
            changing.push(world.lane_states().iter().map(|s| s.changing_lanes).collect());
        }
        let events = label_recording(&frames, c.map.lane_width);
        for (k, f) in frames.iter().enumerate() {
            for (vid, &policy) in changing[k].iter().enumerate() {
                // Skip onset and completion ticks, where the lateral speed is ramping.
                let edge = |j: usize| changing.get(j).map(|c| c[vid]) != Some(policy);
                if k == 0 || edge(k - 1) || edge(k + 1) {
                    continue;
                }
                // Manoeuvres cut off by the end of the recording never change lane.
                if policy && changing[k..].iter().all(|c| c[vid]) {
                    continue;
                }
                let label = events
                    .iter()
                    .find(|e| e.vehicle == vid as u32 && e.start_frame <= f.index && f.index <= e.end_frame)
                    .unwrap()
                    .category;
                if policy {
                    total += 1;
                    agree += usize::from(label.is_lane_change());

                }
            }
        }
    }
    assert!(total > 50, "scenarios should produce lane changes, saw {total} maneuver frames");
    assert!(agree as f64 >= 0.99 * total as f64, "{agree}/{total}");
}

fn event(vehicle: u32, category: BehaviorCategory, start: u64, end: u64, x: f64, y: f64) -> BehaviorEvent {
    BehaviorEvent {
        vehicle,
        category,
        start_frame: start,
        end_frame: end,
        start_time: start as f64 / 10.0,
        end_time: end as f64 / 10.0,
        start_x: x,
        start_y: y,
        heading: 0.0,
    }
}

#[test]
fn clustering_examples() {
    let cfg = ClusteringConfig::default();
    assert!(cluster_behaviors(&[], 30.0, 300, &cfg, 0).unwrap().is_empty());

    let r = BehaviorCategory::ChangeLaneRight;
    let evs = vec![event(1, r, 100, 130, 50.0, 0.0), event(2, r, 150, 180, 51.0, 0.5), event(3, r, 200, 230, 52.0, 1.0)];
    let cs = cluster_behaviors(&evs, 21.0, 210, &cfg, 0).unwrap();
    assert_eq!(cs.len(), 1);
    assert_eq!(cs[0].members, vec![1, 2, 3]);
    assert!(!cs[0].ego_member);
    assert_eq!((cs[0].frame_start, cs[0].frame_end), (100, 210), "ongoing event clipped at now");
    assert_eq!(cs[0].bbox, Aabb::new(50.0, 0.0, 52.0, 1.0));

    let l = BehaviorCategory::ChangeLaneLeft;
    let t = BehaviorCategory::TurnLeft;
    let mixed = vec![event(1, t, 10, 20, 0.0, 0.0), event(2, t, 10, 20, 1.0, 0.0), event(3, l, 10, 20, 0.5, 0.0), event(0, l, 10, 20, 1.5, 0.0)];
    let cs = cluster_behaviors(&mixed, 5.0, 50, &cfg, 0).unwrap();
    assert_eq!(cs.len(), 2);
    assert_eq!(cs[0].category, l);
    assert!(cs[0].ego_member);
    assert_eq!(cs[1].category, t);

    // Events older than the window are ignored.
    assert!(cluster_behaviors(&evs, 60.0, 600, &cfg, 0).unwrap().is_empty());
}

#[test]
fn action_changes_follow_majority_prior() {
    let cfg = ClusteringConfig::default();
    let (lf, l) = (BehaviorCategory::LaneFollow, BehaviorCategory::ChangeLaneLeft);
    let evs = vec![
        event(1, lf, 0, 99, 0.0, 0.0),
        event(1, l, 100, 130, 50.0, 0.0),
        event(2, lf, 0, 109, 0.0, 3.0),
        event(2, l, 110, 140, 51.0, 0.0),
    ];
    let cs = cluster_behaviors(&evs, 15.0, 150, &cfg, 0).unwrap();
    let changes = detect_action_changes(&cs, &evs);
    assert_eq!(changes.len(), 1);
    assert_eq!(changes[0].action, l);
    assert_eq!(changes[0].frame_start, 100);

    // A cluster of lane-follow events is no change.
    let follow: Vec<_> = cs.iter().filter(|c| c.category == lf).cloned().collect();
    assert!(detect_action_changes(&follow, &evs).is_empty());

    // Mixed priors: two of three were lane-following, so the change stands.
    let r = BehaviorCategory::ChangeLaneRight;
    let evs = vec![
        event(1, lf, 0, 99, 0.0, 0.0),
        event(1, l, 100, 130, 50.0, 0.0),
        event(2, lf, 0, 104, 0.0, 0.0),
        event(2, l, 105, 130, 50.5, 0.0),
        event(3, r, 0, 99, 0.0, 0.0),
        event(3, l, 100, 130, 51.0, 0.0),
    ];
    let cs = cluster_behaviors(&evs, 15.0, 150, &cfg, 0).unwrap();
    let lc: Vec<_> = cs.iter().filter(|c| c.category == l).cloned().collect();
    assert_eq!(lc[0].members.len(), 3);
    assert_eq!(detect_action_changes(&lc, &evs).len(), 1);

    // Majority already changing lanes left: no change emitted.
    let evs2 = vec![
        event(1, l, 0, 40, 0.0, 0.0),
        event(1, l, 100, 130, 50.0, 0.0),
        event(2, l, 0, 40, 0.0, 0.0),
        event(2, l, 105, 130, 50.5, 0.0),
    ];
    let cs = cluster_behaviors(&evs2, 15.0, 150, &cfg, 0).unwrap();
    assert!(detect_action_changes(&cs, &evs2).is_empty());
}
