use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use csav_core::arbiter::{FusionMode, Task, ThresholdPolicy, UncertaintyKind, DEFAULT_EPISTEMIC_THRESHOLD};
use csav_core::bridge::{MapGeometry, Rulebase};
use csav_core::edl::{train, EvidentialModel, ModelFile, TrainingSchedule};
use csav_core::eval::{
    baseline_label, evaluate_recording, ground_truth, logic_outcome, render_reports, Assertion, Report, ReportFormat,
};
use csav_core::perception::{light_training_set, PerceptionConfig};
use csav_core::pipeline::{FactStream, ProtocolConfig};
use csav_core::recording::Recording;
use csav_core::rules::load_rules;
use csav_core::scenario::parse_scenario;
use csav_core::sim::run_scenario;

use crate::{EvaluateArgs, Failure, KindArg, LogicInputs, ModeArg, PerceptionFlags, TaskArg};

type Outcome = Result<(), Failure>;

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Light => Task::Light,
            TaskArg::Obstacle => Task::Obstacle,
        }
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn load_recording(path: &Path) -> anyhow::Result<Recording> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Recording::read_from(BufReader::new(file)).with_context(|| format!("{}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<EvidentialModel> {
    Ok(ModelFile::from_json(&read_text(path)?).with_context(|| format!("{}", path.display()))?.model)
}

fn check_perception_flags(flags: &PerceptionFlags) -> Outcome {
    if flags.weather.is_some_and(|w| !(w >= 0.0 && w.is_finite())) {
        return Err(Failure::Usage("--weather must be finite and >= 0".into()));
    }
    if flags.false_negative_rate.is_some_and(|r| !(0.0..=1.0).contains(&r)) {
        return Err(Failure::Usage("--false-negative-rate must lie in [0, 1]".into()));
    }
    Ok(())
}

fn perception_for(rec: &Recording, flags: &PerceptionFlags) -> PerceptionConfig {
    let mut p = rec.perception.clone().unwrap_or_else(|| PerceptionConfig::for_world(&rec.config));
    if let Some(w) = flags.weather {
        p.weather_noise = w;
    }
    if let Some(r) = flags.false_negative_rate {
        p.false_negative_rate = r;
    }
    p
}

pub fn simulate(scenario: &Path, out: &Path) -> Outcome {
    let text = read_text(scenario)?;
    let file = parse_scenario(&text).with_context(|| format!("{}", scenario.display()))?;
    let frames = run_scenario(&file.world).context("simulation failed")?;
    let mut rec = Recording::new(file.world, frames);
    rec.assertions = file.assertions;
    write_file(out, rec.to_bytes())?;
    println!("wrote {} frames to {}", rec.frames.len(), out.display());
    Ok(())
}

pub fn train_edl(
    pattern: &str,
    out: &Path,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
    hidden: usize,
    batch_size: usize,
) -> Outcome {
    let schedule = TrainingSchedule { epochs, learning_rate, seed, hidden, batch_size, ..TrainingSchedule::default() };
    schedule.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Failure::Usage(format!("bad glob `{pattern}`: {e}")))?
        .collect::<Result<_, _>>()
        .context("cannot list recordings")?;
    paths.sort();
    if paths.is_empty() {
        return Err(anyhow!("no recordings match `{pattern}`").into());
    }
    let mut data = Vec::new();
    for path in &paths {
        let rec = load_recording(path)?;
        data.extend(light_training_set(&rec.frames, &perception_for(&rec, &PerceptionFlags::default())));
    }
    let outcome = train(&data, &schedule).context("training failed")?;
    let last = outcome.history.last().context("training ran no epochs")?;
    let correct = data
        .iter()
        .filter(|s| outcome.model.predict(&s.features).is_ok_and(|p| (p.probabilities()[0] > 0.5) == (s.label[0] == 1.0)))
        .count();
    write_file(out, ModelFile::new(outcome.model, schedule).to_json())?;
    println!(
        "trained on {} frames from {} recordings: loss {:.6} (data {:.6}, kl {:.6} x {:.2}), train accuracy {:.4}",
        data.len(),
        paths.len(),
        last.total,
        last.data_term,
        last.kl_term,
        last.lambda,
        correct as f64 / data.len() as f64
    );
    println!("wrote model to {}", out.display());
    Ok(())
}

pub fn perceive(recording: &Path, model: &Path, out: &Path, flags: &PerceptionFlags) -> Outcome {
    check_perception_flags(flags)?;
    let mut rec = load_recording(recording)?;
    let model = load_model(model)?;
    let p = perception_for(&rec, flags);
    rec.perceive(&p, &model).context("perception failed")?;
    write_file(out, rec.to_bytes())?;
    println!("perceived {} frames into {}", rec.frames.len(), out.display());
    Ok(())
}

fn fusion_mode(args: &EvaluateArgs, task: Task) -> Result<FusionMode, Failure> {
    if args.mode == ModeArg::FullyActive {
        if args.uncertainty.is_some() || args.threshold.is_some() {
            return Err(Failure::Usage("--uncertainty and --threshold need --mode uncertainty".into()));
        }
        return Ok(FusionMode::FullyActive);
    }
    let kind = match (args.uncertainty, task) {
        (Some(KindArg::Aleatoric), Task::Obstacle) => {
            return Err(Failure::Usage("the obstacle task has no aleatoric signal; use --uncertainty epistemic".into()))
        }
        (Some(KindArg::Aleatoric), _) | (None, Task::Light) => UncertaintyKind::Aleatoric,
        (Some(KindArg::Epistemic), _) | (None, Task::Obstacle) => UncertaintyKind::Epistemic,
    };
    if !(args.fraction > 0.0 && args.fraction.is_finite()) {
        return Err(Failure::Usage("--fraction must be positive".into()));
    }
    let threshold = match args.threshold.as_deref() {
        None if kind == UncertaintyKind::Aleatoric => ThresholdPolicy::Dynamic { fraction: args.fraction },
        None => ThresholdPolicy::Static { value: DEFAULT_EPISTEMIC_THRESHOLD },
        Some("dynamic") => ThresholdPolicy::Dynamic { fraction: args.fraction },
        Some("online") => ThresholdPolicy::Online { fraction: args.fraction },
        Some(v) => match v.parse::<f64>() {
            Ok(value) if value.is_finite() => ThresholdPolicy::Static { value },
            _ => return Err(Failure::Usage(format!("--threshold must be dynamic, online or a number, got `{v}`"))),
        },
    };
    Ok(FusionMode::UncertaintyInvoked { kind, threshold })
}

/// Rules, protocol and model shared by `evaluate` and `explain`.
struct LogicSetup {
    rulebase: Rulebase,
    protocol: ProtocolConfig,
    model: Option<EvidentialModel>,
    flags: PerceptionFlags,
}

impl LogicSetup {
    fn load(inputs: &LogicInputs, task: Task) -> Result<Self, Failure> {
        check_perception_flags(&inputs.perception)?;
        let rulebase = match &inputs.rules {
            Some(path) => {
                let name = path.file_stem().map_or("rules".into(), |s| s.to_string_lossy().into_owned());
                Rulebase::parse(name, &read_text(path)?).with_context(|| format!("{}", path.display()))?
            }
            None if task == Task::Light => Rulebase::traffic_light(),
            None => Rulebase::obstacle(),
        };
        let protocol = match &inputs.protocol {
            Some(path) => toml::from_str(&read_text(path)?).with_context(|| format!("{}", path.display()))?,
            None => ProtocolConfig::default(),
        };
        let model = inputs.model.as_deref().map(load_model).transpose()?;
        Ok(LogicSetup { rulebase, protocol, model, flags: inputs.perception.clone() })
    }

    /// Loads a recording and makes sure it carries observations.
    fn perceived(&self, path: &Path, mode: FusionMode) -> anyhow::Result<Recording> {
        let mut rec = load_recording(path)?;
        match &self.model {
            Some(m) => {
                let p = perception_for(&rec, &self.flags);
                rec.perceive(&p, m).context("perception failed")?;
            }
            None if rec.observations.is_some() && self.flags.is_empty() => {}
            None if rec.observations.is_some() => bail!("--weather and --false-negative-rate re-run perception and need --model"),
            None if mode != FusionMode::FullyActive => {
                bail!("uncertainty mode needs a light model: pass --model ({} is not perceived)", path.display())
            }
            None => bail!("{} is not perceived: pass --model", path.display()),
        }
        Ok(rec)
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Outcome {
    let task = Task::from(args.task);
    let mode = fusion_mode(args, task)?;
    let setup = LogicSetup::load(&args.logic, task)?;
    let results: Vec<anyhow::Result<(Report, Vec<Assertion>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = args
            .recordings
            .iter()
            .map(|path| {
                let setup = &setup;
                s.spawn(move || {
                    let rec = setup.perceived(path, mode)?;
                    let report = evaluate_recording(&rec, mode, task, &setup.rulebase, &setup.protocol)
                        .with_context(|| format!("{}", path.display()))?;
                    Ok((report, rec.assertions))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread panicked")).collect()
    });
    let mut reports = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for r in results {
        let (report, assertions) = r?;
        for a in assertions.iter().filter(|a| a.applies_to(&report)) {
            if let Err(m) = a.check(&report) {
                failed.push(format!("{}: {m}", report.scenario));
            }
        }
        reports.push(report);
    }

    print!("{}", render_reports(&reports, ReportFormat::Markdown));
    for r in &reports {
        let mut line = format!("{}: {} frames, logic applicable on {}", r.scenario, r.frames, r.applicable_frames);
        if mode != FusionMode::FullyActive {
            let _ = write!(line, ", invoked on {}", r.logic_evaluations);
            if let Some(t) = r.threshold {
                let _ = write!(line, " (threshold {t:.4})");
            }
        }
        println!("{line}");
    }
    if let Some(prefix) = &args.report {
        for (ext, format) in [("json", ReportFormat::Structured), ("csv", ReportFormat::Csv), ("md", ReportFormat::Markdown)] {
            let mut path = prefix.clone().into_os_string();
            path.push(format!(".{ext}"));
            write_file(Path::new(&path), render_reports(&reports, format))?;
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(failed))
    }
}

pub fn explain(recording: &Path, frame: u64, task: TaskArg, inputs: &LogicInputs) -> Outcome {
    let task = Task::from(task);
    let setup = LogicSetup::load(inputs, task)?;
    let rec = setup.perceived(recording, FusionMode::FullyActive)?;
    let k = rec
        .frames
        .iter()
        .position(|f| f.index == frame)
        .ok_or_else(|| anyhow!("frame {frame} is not in the recording ({} frames)", rec.frames.len()))?;
    let observations = rec.observations.as_deref().expect("perceived above");
    let map = MapGeometry::from_map(&rec.config.map);
    let lane_width = map.lane_width;
    let stream = FactStream::new(&rec.frames, observations, map, setup.protocol.clone()).context("fact stream")?;
    let outcome = logic_outcome(&stream, k, task, &setup.rulebase).context("logic evaluation")?;
    let tree = match (&outcome.derivation, outcome.applicable) {
        (Some(t), true) => t,
        _ => return Err(anyhow!("frame {frame}: no logic derivation (the rules do not apply)").into()),
    };
    let f = &rec.frames[k];
    let (yes, no) = match task {
        Task::Light => ("red", "green"),
        Task::Obstacle => ("obstacle", "clear"),
    };
    let word = |b: bool| if b { yes } else { no };
    println!(
        "frame {frame} ({}): logic {}, baseline {}, ground truth {}",
        task.as_str(),
        word(outcome.positive),
        word(baseline_label(f, &observations[k], task, lane_width)),
        word(ground_truth(f, task, &rec.config))
    );
    print!("{}", tree.render());
    println!("facts:");
    for fact in tree.leaf_facts() {
        println!("  {fact}");
    }
    Ok(())
}

fn read_reports(path: &Path) -> anyhow::Result<Vec<Report>> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{}", path.display()))?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        single => vec![single],
    };
    items
        .into_iter()
        .map(|v| Report::from_json(&v.to_string()).with_context(|| format!("{}", path.display())))
        .collect()
}

pub fn report(inputs: &[PathBuf], format: &str, out: Option<&Path>) -> Outcome {
    let format: ReportFormat = format.parse().map_err(|e: csav_core::eval::EvalError| Failure::Usage(e.to_string()))?;
    let mut reports = Vec::new();
    for path in inputs {
        reports.extend(read_reports(path)?);
    }
    let text = render_reports(&reports, format);
    match out {
        Some(path) => write_file(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn check_rules(path: &Path) -> Outcome {
    let program = load_rules(&read_text(path)?).with_context(|| format!("{}", path.display()))?;
    println!(
        "{}: {} rules, {} facts, {} strata",
        path.display(),
        program.program.rules.len(),
        program.program.facts.len(),
        program.strata.len()
    );
    let depth = program.stratum_of.values().max().map_or(0, |m| m + 1);
    for level in 0..depth {
        let preds: Vec<&str> =
            program.stratum_of.iter().filter(|(_, s)| **s == level).map(|(p, _)| p.as_str()).collect();
        println!("  stratum {level}: {}", preds.join(", "));
    }
    Ok(())
}
