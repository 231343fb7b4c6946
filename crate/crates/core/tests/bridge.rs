use csav_core::arbiter::Task;
use csav_core::bridge::{
    facts_from_frame, logic_applicable, logic_light_verdict, logic_obstacle_verdict, BehaviorSnapshot, BridgeConfig,
    BridgeError, FactBase, FrameContext, MapGeometry, RedVariant, Rulebase,
};
use csav_core::edl::EvidentialModel;
use csav_core::eval::ground_truth;
use csav_core::perception::PerceptionConfig;
use csav_core::pipeline::{perceive_frames, FactStream, ProtocolConfig};
use csav_core::rules::{parse_rules, Fact, Value};
use csav_core::scenario;
use csav_core::sim::{run_scenario, WorldConfig};
use proptest::prelude::*;

fn base(text: &str) -> FactBase {
    let program = parse_rules(text).unwrap();
    assert!(program.rules.is_empty());
    FactBase { frame: 10, facts: program.facts }
}

const JUNCTION: &str = "frame(10). grace_period(2.0). intersection(10, 0, 90.0, 90.0, 110.0, 110.0). nearby_intersection(10, 0).";

#[test]
fn stopped_queue_concludes_red() {
    let facts = base(&format!("{JUNCTION} in_front(10, 4). stopped(10, 4). approaching(10, 4, 0)."));
    let v = logic_light_verdict(&facts, &Rulebase::traffic_light()).unwrap();
    assert!(v.red && v.applicable);
    assert_eq!(v.variant(), Some(RedVariant::StoppedVehicleInFront));
    assert!(v.derivation.unwrap().render().contains("stopped(10, 4)  [fact]"));
}

#[test]
fn moving_vehicle_in_front_is_not_a_queue() {
    let facts = base(&format!("{JUNCTION} in_front(10, 4). approaching(10, 4, 0)."));
    let v = logic_light_verdict(&facts, &Rulebase::traffic_light()).unwrap();
    assert!(!v.red && !v.applicable && v.derivation.is_none());
}

const CROSSING: &str = "behavior_cluster(10, 1, straight, 5, 20, false). cluster_at_intersection(10, 1, 0). cluster_crossing(10, 1).";

#[test]
fn cross_traffic_concludes_red() {
    let facts = base(&format!("{JUNCTION} {CROSSING}"));
    let v = logic_light_verdict(&facts, &Rulebase::traffic_light()).unwrap();
    assert!(v.red);
    assert_eq!(v.variant(), Some(RedVariant::CrossTraffic));
}

#[test]
fn ego_in_a_straight_cluster_blocks_cross_traffic_red() {
    let facts = base(&format!("{JUNCTION} {CROSSING} behavior_cluster(10, 2, straight, 8, 30, true)."));
    let v = logic_light_verdict(&facts, &Rulebase::traffic_light()).unwrap();
    assert!(!v.red && v.applicable);
    assert!(v.derivation.unwrap().fact.pred == "green_traffic_light");
}

#[test]
fn codirectional_flow_reads_green() {
    let facts = base(&format!(
        "{JUNCTION} behavior_cluster(10, 1, turn_left, 5, 20, false). cluster_at_intersection(10, 1, 0). cluster_codirectional(10, 1)."
    ));
    let v = logic_light_verdict(&facts, &Rulebase::traffic_light()).unwrap();
    assert!(v.applicable && !v.red);
}

#[test]
fn inactive_or_distant_clusters_do_not_apply() {
    let outside = base(&format!("{JUNCTION} behavior_cluster(10, 1, straight, 11, 20, false). cluster_at_intersection(10, 1, 0). cluster_crossing(10, 1)."));
    assert!(!logic_applicable(&outside, &Rulebase::traffic_light()).unwrap());
    let elsewhere = base(&format!("{JUNCTION} behavior_cluster(10, 1, straight, 5, 20, false). cluster_at_intersection(10, 1, 3). cluster_crossing(10, 1)."));
    assert!(!logic_applicable(&elsewhere, &Rulebase::traffic_light()).unwrap());
}

#[test]
fn grace_period_suspends_the_light_rules() {
    let rb = Rulebase::traffic_light();
    let early = base(&format!("{JUNCTION} {CROSSING} since_green(10, 1.5)."));
    assert!(!logic_applicable(&early, &rb).unwrap());
    let late = base(&format!("{JUNCTION} {CROSSING} since_green(10, 2.0)."));
    assert!(logic_applicable(&late, &rb).unwrap());
}

const LANE_CHANGE: &str = "frame(10). change_action_cluster(4, 30, change_lane_left, false, 10.0, 0.0, 20.0, 4.0). cluster_region(10.0, 0.0, 20.0, 4.0, 10.0, -2.0, 70.0, 6.0).";

#[test]
fn unexplained_lane_change_infers_an_undetected_obstacle() {
    let v = logic_obstacle_verdict(&base(LANE_CHANGE), &Rulebase::obstacle()).unwrap();
    assert!(v.obstacle && v.applicable && v.undetected);
    let loc = v.location.unwrap();
    assert_eq!((loc.c1x, loc.c1y, loc.c2x, loc.c2y), (10.0, -2.0, 70.0, 6.0));
    assert_eq!(v.derivation.unwrap().fact.pred, "undetected_obstacle");
}

#[test]
fn lane_change_at_an_intersection_is_explained() {
    let facts = base(&format!("{LANE_CHANGE} intersection_near_box(10.0, 0.0, 20.0, 4.0)."));
    let v = logic_obstacle_verdict(&facts, &Rulebase::obstacle()).unwrap();
    assert!(v.applicable && !v.obstacle && !v.undetected && v.location.is_none());
    assert_eq!(v.derivation.unwrap().fact.pred, "no_obstacle_ahead");
}

#[test]
fn detected_blockage_is_not_reported_as_undetected() {
    let facts = base(&format!("{LANE_CHANGE} obstacle_near_box(10.0, 0.0, 20.0, 4.0)."));
    let v = logic_obstacle_verdict(&facts, &Rulebase::obstacle()).unwrap();
    assert!(v.obstacle && !v.undetected);
}

#[test]
fn lane_follow_clusters_are_not_evidence() {
    let facts = base("frame(10). change_action_cluster(4, 30, lane_follow, false, 10.0, 0.0, 20.0, 4.0).");
    let v = logic_obstacle_verdict(&facts, &Rulebase::obstacle()).unwrap();
    assert!(!v.applicable && !v.obstacle);
}

fn perceived(world: &WorldConfig) -> (Vec<csav_core::Frame>, Vec<csav_core::Observation>) {
    let frames = run_scenario(world).unwrap();
    let obs = perceive_frames(&frames, &PerceptionConfig::for_world(world), &EvidentialModel::init(4, 8, 2, 0)).unwrap();
    (frames, obs)
}

#[test]
fn fact_builder_rejects_mismatched_inputs() {
    let world = scenario::intersection(1, 5, 1.0);
    let (frames, obs) = perceived(&world);
    let map = MapGeometry::from_map(&world.map);
    let cfg = BridgeConfig::default();
    let ctx = FrameContext { ego_id: frames[0].ego_id, since_green: None };
    let wrong = BehaviorSnapshot { frame: 3, ..Default::default() };
    assert!(matches!(facts_from_frame(&obs[0], &wrong, &ctx, &map, &cfg), Err(BridgeError::FrameMismatch { .. })));
    let ok = BehaviorSnapshot { frame: obs[0].frame, ..Default::default() };
    let stranger = FrameContext { ego_id: 9999, ..ctx };
    assert!(matches!(facts_from_frame(&obs[0], &ok, &stranger, &map, &cfg), Err(BridgeError::MissingEgo(9999))));
    let fb = facts_from_frame(&obs[0], &ok, &ctx, &map, &cfg).unwrap();
    assert!(fb.facts.windows(2).all(|w| w[0] < w[1]), "sorted, no duplicates");
    assert!(fb.facts.contains(&Fact::new("frame", vec![Value::from(obs[0].frame)])));
}

#[test]
fn light_verdicts_are_sound_on_dense_traffic() {
    let rb = Rulebase::traffic_light();
    let (mut red, mut by_variant) = (0, [0usize; 2]);
    for seed in 1..=2 {
        let world = scenario::intersection(seed, 90, 60.0);
        let (frames, obs) = perceived(&world);
        let stream = FactStream::new(&frames, &obs, MapGeometry::from_map(&world.map), ProtocolConfig::default()).unwrap();
        for (k, frame) in frames.iter().enumerate() {
            let v = logic_light_verdict(&stream.facts(k).unwrap(), &rb).unwrap();
            // The arbiter only consults applicable verdicts.
            if v.red && v.applicable {
                red += 1;
                match v.variant() {
                    Some(RedVariant::StoppedVehicleInFront) => by_variant[0] += 1,
                    Some(RedVariant::CrossTraffic) => by_variant[1] += 1,
                    other => panic!("unexpected variant {other:?}"),
                }
                assert!(ground_truth(frame, Task::Light, &world), "red concluded on a green frame {}", frame.index);
            }
        }
    }
    assert!(red > 100 && by_variant.iter().all(|n| *n > 0), "{red} red frames, variants {by_variant:?}");
}

#[test]
fn inferred_obstacles_overlap_the_real_one() {
    let rb = Rulebase::obstacle();
    let mut located = 0;
    for seed in 1..=2 {
        let world = scenario::animal(seed, 10, 60.0);
        let (frames, obs) = perceived(&world);
        let stream = FactStream::new(&frames, &obs, MapGeometry::from_map(&world.map), ProtocolConfig::default()).unwrap();
        for (k, frame) in frames.iter().enumerate() {
            let v = logic_obstacle_verdict(&stream.facts(k).unwrap(), &rb).unwrap();
            if let Some(loc) = v.location {
                located += 1;
                assert!(frame.obstacles.iter().any(|o| o.bbox.overlaps(&loc)), "frame {}: {loc:?}", frame.index);
            }
            if v.obstacle {
                assert!(!frame.obstacles.is_empty());
            }
        }
    }
    assert!(located > 50, "{located}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn light_logic_ignores_the_baseline_detection(seed in 0u64..50, k in 0usize..300) {
        let world = scenario::intersection(seed, 40, 30.0);
        let (frames, obs) = perceived(&world);
        let stream = FactStream::new(&frames, &obs, MapGeometry::from_map(&world.map), ProtocolConfig::default()).unwrap();
        let rb = Rulebase::traffic_light();
        let mut with = stream.facts(k).unwrap();
        let detected = Fact::new("light_detected", vec![Value::from(with.frame)]);
        with.facts.retain(|f| *f != detected);
        let without = logic_light_verdict(&with, &rb).unwrap();
        with.facts.push(detected);
        let flagged = logic_light_verdict(&with, &rb).unwrap();
        prop_assert_eq!((without.red, without.applicable), (flagged.red, flagged.applicable));
    }

    #[test]
    fn extra_stopped_queue_never_clears_red(seed in 0u64..50, k in 0usize..300) {
        let world = scenario::intersection(seed, 40, 30.0);
        let (frames, obs) = perceived(&world);
        let stream = FactStream::new(&frames, &obs, MapGeometry::from_map(&world.map), ProtocolConfig::default()).unwrap();
        let rb = Rulebase::traffic_light();
        let mut facts = stream.facts(k).unwrap();
        let before = logic_light_verdict(&facts, &rb).unwrap();
        let f = Value::from(facts.frame);
        facts.facts.push(Fact::new("stopped", vec![f.clone(), Value::from(77_777u64)]));
        let after = logic_light_verdict(&facts, &rb).unwrap();
        prop_assert!(!before.red || after.red);
    }
}
