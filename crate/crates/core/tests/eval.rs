use std::sync::OnceLock;

use csav_core::arbiter::{FusionMode, Task, ThresholdPolicy, UncertaintyKind};
use csav_core::bridge::Rulebase;
use csav_core::edl::EvidentialModel;
use csav_core::eval::{
    confusion, evaluate_recording, metrics, render_report, render_reports, Assertion, EvalError, Report, ReportFormat,
    CSV_HEADER,
};
use csav_core::perception::PerceptionConfig;
use csav_core::pipeline::ProtocolConfig;
use csav_core::recording::Recording;
use csav_core::scenario;
use csav_core::sim::{run_scenario, WorldConfig};
use proptest::prelude::*;

fn model() -> &'static EvidentialModel {
    static MODEL: OnceLock<EvidentialModel> = OnceLock::new();
    MODEL.get_or_init(|| scenario::reference_light_model().unwrap())
}

fn recording(world: &WorldConfig, perception: &PerceptionConfig) -> Recording {
    let mut rec = Recording::new(world.clone(), run_scenario(world).unwrap());
    rec.perceive(perception, model()).unwrap();
    rec
}

fn rulebase(task: Task) -> Rulebase {
    match task {
        Task::Light => Rulebase::traffic_light(),
        Task::Obstacle => Rulebase::obstacle(),
    }
}

fn evaluate(rec: &Recording, mode: FusionMode, task: Task) -> Report {
    evaluate_recording(rec, mode, task, &rulebase(task), &ProtocolConfig::default()).unwrap()
}

fn light_report(mode: FusionMode) -> Report {
    let world = scenario::intersection(3, 60, 40.0);
    let mut p = PerceptionConfig::for_world(&world);
    p.weather_noise = 1.0;
    evaluate(&recording(&world, &p), mode, Task::Light)
}

proptest! {
    #[test]
    fn metrics_match_a_direct_recount(labels in prop::collection::vec((any::<bool>(), any::<bool>()), 0..300)) {
        let (pred, truth): (Vec<bool>, Vec<bool>) = labels.iter().cloned().unzip();
        let m = metrics(&confusion(&pred, &truth).unwrap());
        let count = |p: bool, t: bool| labels.iter().filter(|&&(a, b)| a == p && b == t).count() as f64;
        let (tp, fp, tn, fn_) = (count(true, true), count(true, false), count(false, false), count(false, true));
        let n = labels.len() as f64;
        prop_assert_eq!(m.accuracy, (n > 0.0).then(|| (tp + tn) / n));
        prop_assert_eq!(m.precision, (tp + fp > 0.0).then(|| tp / (tp + fp)));
        prop_assert_eq!(m.recall, (tp + fn_ > 0.0).then(|| tp / (tp + fn_)));
        if let (Some(p), Some(r), Some(f)) = (m.precision, m.recall, m.f_score) {
            let expected = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            prop_assert!((f - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn confusion_rejects_unequal_lengths() {
    assert!(matches!(
        confusion(&[true], &[true, false]),
        Err(EvalError::LengthMismatch { predictions: 1, truths: 2 })
    ));
}

#[test]
fn csv_round_trips_through_a_csv_reader() {
    let reports = [light_report(FusionMode::FullyActive), light_report(FusionMode::aleatoric())];
    let text = render_reports(&reports, ReportFormat::Csv);
    assert!(text.starts_with(CSV_HEADER));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let parse = |s: &str| if s == "N/A" { None } else { Some(s.parse::<f64>().unwrap()) };
    for (row, (report, (model, m))) in rows.iter().zip(reports.iter().flat_map(|r| r.rows().map(|x| (r, x)))) {
        assert_eq!(&row[0], report.scenario);
        assert_eq!(&row[1], model);
        assert_eq!(
            (parse(&row[2]), parse(&row[3]), parse(&row[4]), parse(&row[5])),
            (m.accuracy, m.precision, m.recall, m.f_score)
        );
    }
}

#[test]
fn markdown_has_one_row_per_model_and_na_cells() {
    let world = scenario::animal(1, 10, 20.0);
    let r = evaluate(&recording(&world, &PerceptionConfig::for_world(&world)), FusionMode::epistemic(), Task::Obstacle);
    let md = render_report(&r, ReportFormat::Markdown);
    let lines: Vec<&str> = md.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("| Uncertainty (epistemic, static 0.5) Obstacles | Accuracy"));
    assert!(lines[2].contains("Baseline") && lines[3].contains("Logic") && lines[4].contains("Hybrid"));
    assert_eq!(r.baseline.precision, None);
    assert!(lines[2].contains("| N/A |"));
    assert!("pdf".parse::<ReportFormat>().is_err());
}

#[test]
fn structured_report_round_trips() {
    let r = light_report(FusionMode::aleatoric());
    let back = Report::from_json(&render_report(&r, ReportFormat::Structured)).unwrap();
    assert_eq!(back, r);
    let stale = r.to_json().replacen("report-v1", "report-v0", 1);
    assert!(matches!(Report::from_json(&stale), Err(EvalError::Format(_))));
}

#[test]
fn uncertainty_mode_consults_logic_only_above_threshold() {
    let r = light_report(FusionMode::aleatoric());
    let t = r.threshold.unwrap();
    assert!(t < 0.0, "aleatoric thresholds are negative, got {t}");
    let invoked = r.decisions.iter().filter(|d| d.decision.invoked).count();
    assert_eq!(invoked, r.logic_evaluations);
    assert!(invoked > 0 && invoked < r.frames);
    for d in r.decisions.iter().map(|d| &d.decision) {
        if !d.invoked {
            assert!(d.logic.is_none());
            assert_eq!(d.final_label, d.baseline);
            assert_eq!(d.explanation, "baseline");
        }
    }
}

#[test]
fn online_threshold_is_reported_as_absent() {
    let mode = FusionMode::UncertaintyInvoked {
        kind: UncertaintyKind::Aleatoric,
        threshold: ThresholdPolicy::Online { fraction: 1.0 },
    };
    let r = light_report(mode);
    assert_eq!(r.threshold, None);
    assert!(r.logic_evaluations > 0);
}

#[test]
fn overruled_baselines_carry_a_derivation() {
    let r = light_report(FusionMode::FullyActive);
    let mut overruled = 0;
    for d in r.decisions.iter().map(|d| &d.decision) {
        if d.final_label != d.baseline {
            overruled += 1;
            assert!(d.logic_applicable());
            let head = if d.final_label { "red_traffic_light(" } else { "green_traffic_light(" };
            assert!(d.explanation.starts_with(head), "{}", d.explanation);
            assert!(d.explanation.contains("[fact]"));
        }
    }
    assert!(overruled > 0);
}

#[test]
fn evaluation_needs_perception_and_a_matching_signal() {
    let world = scenario::intersection(1, 5, 5.0);
    let bare = Recording::new(world.clone(), run_scenario(&world).unwrap());
    let err = evaluate_recording(&bare, FusionMode::FullyActive, Task::Light, &Rulebase::traffic_light(), &ProtocolConfig::default());
    assert!(matches!(err, Err(EvalError::NotPerceived)));
    let rec = recording(&world, &PerceptionConfig::for_world(&world));
    let err = evaluate_recording(&rec, FusionMode::aleatoric(), Task::Obstacle, &Rulebase::obstacle(), &ProtocolConfig::default());
    assert!(matches!(err, Err(EvalError::Config(_))));
}

#[test]
fn assertions_check_named_metrics() {
    let r = light_report(FusionMode::FullyActive);
    let a = |metric: &str, op: &str, value: f64| Assertion { task: None, mode: None, metric: metric.into(), op: op.into(), value };
    assert!(a("hybrid.accuracy", ">=", 0.0).check(&r).is_ok());
    assert!(a("hybrid.accuracy", ">", 1.0).check(&r).is_err());
    assert!(a("logic_fraction", "==", 1.0).check(&r).is_ok());
    assert!(a("oracle.accuracy", ">=", 0.0).check(&r).is_err());
    assert!(a("hybrid.speed", ">=", 0.0).check(&r).is_err());
    assert!(a("hybrid.accuracy", "~", 0.0).check(&r).is_err());
    let scoped = Assertion { task: Some(Task::Obstacle), ..a("hybrid.accuracy", ">=", 0.0) };
    assert!(!scoped.applies_to(&r));
    let uncertain = Assertion { mode: Some("uncertainty".into()), ..a("hybrid.accuracy", ">=", 0.0) };
    assert!(!uncertain.applies_to(&r));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn hybrid_never_trails_baseline_on_lights(seed in 0u64..1000, npcs in 30usize..90, fnr in 0.0f64..0.8) {
        let world = scenario::intersection(seed, npcs, 60.0);
        let mut p = PerceptionConfig::for_world(&world);
        p.false_negative_rate = fnr;
        let r = evaluate(&recording(&world, &p), FusionMode::FullyActive, Task::Light);
        prop_assert!(r.hybrid.accuracy >= r.baseline.accuracy, "{:?} vs {:?}", r.hybrid, r.baseline);
    }

    #[test]
    fn hybrid_never_trails_baseline_on_obstacles(seed in 0u64..1000, npcs in 5usize..20) {
        let world = scenario::obstruction(seed, npcs, 40.0);
        let r = evaluate(&recording(&world, &PerceptionConfig::for_world(&world)), FusionMode::FullyActive, Task::Obstacle);
        prop_assert!(r.hybrid.accuracy >= r.baseline.accuracy, "{:?} vs {:?}", r.hybrid, r.baseline);
    }
}
