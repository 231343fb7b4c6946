//! `csav`: simulate scenarios, train the light classifier, perceive, evaluate
//! the hybrid pipeline and explain its decisions.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status of a failed command.
#[derive(Debug)]
pub enum Failure {
    /// Inconsistent flags, detected before any work (exit 1).
    Usage(String),
    /// Unreadable, malformed or unsuitable input (exit 2).
    Data(anyhow::Error),
    /// Scenario assertions failed (exit 3).
    Assertion(Vec<String>),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

#[derive(Parser)]
#[command(name = "csav", version, about = "Hybrid commonsense checking of simulated AV perception")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write a rec-v1 recording.
    Simulate {
        /// Scenario TOML: a world config plus optional [[assertions]].
        #[arg(long)]
        scenario: PathBuf,
        /// Recording to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the evidential light classifier on recordings matching a glob.
    TrainEdl {
        /// Glob of recordings, e.g. 'runs/train-*.jsonl'.
        #[arg(long)]
        recordings: String,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        /// Learning rate.
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        hidden: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
    },
    /// Run perception over a recording and write a rec-obs-v1 recording.
    Perceive {
        #[arg(long)]
        recording: PathBuf,
        /// Light classifier written by train-edl.
        #[arg(long)]
        model: PathBuf,
        /// Perceived recording to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        perception: PerceptionFlags,
    },
    /// Score baseline, logic and hybrid labels and write reports.
    Evaluate(EvaluateArgs),
    /// Print the derivation behind the logic verdict at one frame.
    Explain {
        #[arg(long)]
        recording: PathBuf,
        /// Frame index.
        #[arg(long)]
        frame: u64,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[command(flatten)]
        logic: LogicInputs,
    },
    /// Combine report-v1 files into one table.
    Report {
        /// report-v1 JSON files written by evaluate.
        #[arg(long = "input", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "markdown", value_parser = ["csv", "markdown", "structured"])]
        format: String,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and stratify a rule file.
    CheckRules {
        /// Rule file to check.
        #[arg(long)]
        rules: PathBuf,
    },
}

#[derive(Args, Clone, Default)]
pub struct PerceptionFlags {
    /// Overrides the recording's weather noise.
    #[arg(long)]
    weather: Option<f64>,
    /// Probability of dropping a red light detection.
    #[arg(long)]
    false_negative_rate: Option<f64>,
}

impl PerceptionFlags {
    fn is_empty(&self) -> bool {
        self.weather.is_none() && self.false_negative_rate.is_none()
    }
}

/// Where perception and rules come from when a command needs logic verdicts.
#[derive(Args, Clone)]
pub struct LogicInputs {
    /// Rule file; the shipped rulebase of the task when absent.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Light classifier; required unless the recording is already perceived.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Protocol settings (clustering, bridge thresholds) as TOML.
    #[arg(long)]
    protocol: Option<PathBuf>,
    #[command(flatten)]
    perception: PerceptionFlags,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long = "recording", required = true, num_args = 1..)]
    recordings: Vec<PathBuf>,
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long, value_enum, default_value = "fully-active")]
    mode: ModeArg,
    /// Uncertainty signal [default: aleatoric for light, epistemic for obstacle]
    #[arg(long, value_enum)]
    uncertainty: Option<KindArg>,
    /// `dynamic`, `online` or a fixed value [default: dynamic for aleatoric, 0.5 for epistemic]
    #[arg(long)]
    threshold: Option<String>,
    /// Multiplier of the mean uncertainty for dynamic and online thresholds.
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    /// Output prefix: writes PREFIX.json, PREFIX.csv and PREFIX.md.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    logic: LogicInputs,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Light,
    Obstacle,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
pub enum ModeArg {
    FullyActive,
    Uncertainty,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KindArg {
    Aleatoric,
    Epistemic,
}

fn main() -> ExitCode {
    // Die quietly when piped into `head` instead of panicking in println!.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate { scenario, out } => commands::simulate(&scenario, &out),
        Command::TrainEdl { recordings, out, epochs, lr, seed, hidden, batch_size } => {
            commands::train_edl(&recordings, &out, epochs, lr, seed, hidden, batch_size)
        }
        Command::Perceive { recording, model, out, perception } => commands::perceive(&recording, &model, &out, &perception),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Explain { recording, frame, task, logic } => commands::explain(&recording, frame, task, &logic),
        Command::Report { inputs, format, out } => commands::report(&inputs, &format, out.as_deref()),
        Command::CheckRules { rules } => commands::check_rules(&rules),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Assertion(failed)) => {
            for f in &failed {
                eprintln!("assertion failed: {f}");
            }
            ExitCode::from(3)
        }
    }
}
