//! Command-line runner for the bin-picking experiments.
//!
//! Subcommands: `run` executes a task over seeded episodes, `analyze` turns
//! an attempts.jsonl back into CSV summaries, `scenario` replays a scripted
//! world, `calibrate` sweeps the simulator gains, and `grasp` runs the
//! grasp detector on a PGM depth map.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use tanglepick_core::config::{parse_key_values, validate_config, ControllerConfig};
use tanglepick_core::controller::{LogLine, LogSink, Policy};
use tanglepick_core::grasp::{
    candidates_to_csv, detect_grasps, rank_with_mid_bias, read_depth_pgm, read_mask_pgm,
    GripperTemplate, Mask,
};
use tanglepick_core::runner::{
    parse_jsonl, records_from_log, run_task, summarize, summary_csv, thresholds_csv,
    RunSummary, TaskKind, TaskSpec,
};
use tanglepick_core::sim::{init_world, ObjectProfile, ScriptStep, WorldConfig};
use tanglepick_core::types::AttemptRecord;

#[derive(Parser)]
#[command(name = "tanglepick", version, about = "Closed-loop bin picking of entangled wire harnesses, simulated")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a picking task over seeded episodes.
    Run(RunArgs),
    /// Recompute CSV summaries from an attempts.jsonl.
    Analyze(AnalyzeArgs),
    /// Replay a scripted scenario file.
    Scenario(ScenarioArgs),
    /// Sweep simulator gains and report per-policy success rates.
    Calibrate(CalibrateArgs),
    /// Detect grasps on a PGM depth map and write a candidate CSV.
    Grasp(GraspArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Emptying,
    Standard,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    LiftG,
    OursG,
    OursA,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Policy {
        match p {
            PolicyArg::LiftG => Policy::LiftG,
            PolicyArg::OursG => Policy::OursG,
            PolicyArg::OursA => Policy::OursA,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    Medium74,
    Long120,
}

impl From<ProfileArg> for ObjectProfile {
    fn from(p: ProfileArg) -> ObjectProfile {
        match p {
            ProfileArg::Medium74 => ObjectProfile::Medium74cm,
            ProfileArg::Long120 => ObjectProfile::Long120cm,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long, value_enum)]
    policy: PolicyArg,
    /// Objects in the bin at the start of each episode.
    #[arg(long, default_value_t = 8)]
    objects: usize,
    #[arg(long, value_enum, default_value_t = ProfileArg::Medium74)]
    profile: ProfileArg,
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Attempt budget per episode; defaults to three per object.
    #[arg(long)]
    max_attempts: Option<usize>,
    /// Controller config file (flat key=value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline config overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// attempts.jsonl produced by `run` or `scenario`.
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file.
    scenario: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Standard-task episodes per grid point and policy.
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    #[arg(long, default_value_t = 40)]
    objects: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    max_attempts: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GraspArgs {
    /// Depth map in ASCII PGM with a resolution comment.
    depth: PathBuf,
    /// Mask pair prefix: <prefix>.contact.pgm and <prefix>.collision.pgm.
    /// Omitted: a parallel-jaw template from the controller config.
    #[arg(long)]
    template_prefix: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    rotations: usize,
    #[arg(long, default_value_t = 4)]
    heights: usize,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Middle-of-object re-ranking weight; 0 keeps the raw ranking.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

/// Scenario file: a world, a policy, a forced-outcome script, and an
/// attempt budget.
#[derive(Deserialize)]
struct ScenarioFile {
    name: String,
    world: WorldConfig,
    #[serde(default = "default_policy")]
    policy: Policy,
    #[serde(default = "one")]
    attempts: usize,
    #[serde(default)]
    script: Vec<ScriptStep>,
}

fn default_policy() -> Policy {
    Policy::OursG
}

fn one() -> usize {
    1
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Scenario(args) => cmd_scenario(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Grasp(args) => cmd_grasp(args),
    }
}

fn load_controller_config(path: &Option<PathBuf>, overrides: &[String]) -> Result<ControllerConfig> {
    let mut pairs = Vec::new();
    if let Some(path) = path {
        let content = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        pairs = parse_key_values(&content)?;
    }
    for item in overrides {
        let (k, v) = item
            .split_once('=')
            .with_context(|| format!("override `{item}` is not KEY=VALUE"))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(validate_config(&pairs)?)
}

/// Streams log lines straight to a JSONL file.
struct JsonlSink {
    out: BufWriter<fs::File>,
}

impl JsonlSink {
    fn create(path: &Path) -> Result<Self> {
        let file = fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        Ok(Self { out: BufWriter::new(file) })
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

impl LogSink for JsonlSink {
    fn emit(&mut self, line: &LogLine) {
        let text = serde_json::to_string(line).expect("log lines serialize");
        writeln!(self.out, "{text}").expect("log write");
    }
}

fn write_outputs(out_dir: &Path, summary: &RunSummary) -> Result<()> {
    fs::write(out_dir.join("summary.csv"), summary_csv(summary))?;
    fs::write(out_dir.join("thresholds.csv"), thresholds_csv(summary))?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config = load_controller_config(&args.config, &args.overrides)?;
    let spec = TaskSpec {
        task: match args.task {
            TaskArg::Emptying => TaskKind::Emptying,
            TaskArg::Standard => TaskKind::Standard,
        },
        policy: args.policy.into(),
        world: WorldConfig {
            object_profile: args.profile.into(),
            n_objects: args.objects,
            rng_seed: args.seed,
            ..WorldConfig::default()
        },
        episodes: args.episodes,
        max_attempts: args
            .max_attempts
            .unwrap_or_else(|| TaskSpec::default_max_attempts(args.objects)),
    };
    fs::create_dir_all(&args.out_dir)?;
    let mut sink = JsonlSink::create(&args.out_dir.join("attempts.jsonl"))?;
    let (summary, _records) = run_task(&spec, &config, &mut sink)?;
    sink.finish()?;
    write_outputs(&args.out_dir, &summary)?;
    println!(
        "{} attempts, {} successes, success_rate {:.3}",
        summary.attempts, summary.successes, summary.success_rate
    );
    println!("wrote {}", args.out_dir.join("attempts.jsonl").display());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let content = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let lines = parse_jsonl(&content).context("parsing attempts.jsonl")?;
    let records: Vec<AttemptRecord> = records_from_log(&lines);
    if records.is_empty() {
        bail!("no attempt records in {}", args.input.display());
    }
    let mut summary = summarize(&records)?;
    summary.episodes = lines
        .iter()
        .filter(|l| matches!(l, LogLine::Episode { .. }))
        .count();
    summary.completed_episodes = lines
        .iter()
        .filter(|l| matches!(l, LogLine::EpisodeEnd { completed: true, .. }))
        .count();
    fs::create_dir_all(&args.out_dir)?;
    write_outputs(&args.out_dir, &summary)?;
    println!(
        "{} attempts, {} successes, success_rate {:.3}",
        summary.attempts, summary.successes, summary.success_rate
    );
    Ok(())
}

fn cmd_scenario(args: ScenarioArgs) -> Result<()> {
    let config = load_controller_config(&args.config, &args.overrides)?;
    let content = fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let scenario: ScenarioFile = serde_json::from_str(&content).context("parsing scenario file")?;
    fs::create_dir_all(&args.out_dir)?;
    let traces_dir = args.out_dir.join("traces");
    fs::create_dir_all(&traces_dir)?;

    let mut world = init_world(&scenario.world)?;
    world.push_script(scenario.script.iter().copied());
    let mut thresholds = config.initial_thresholds();
    let mut sink = JsonlSink::create(&args.out_dir.join("attempts.jsonl"))?;
    let mut records = Vec::new();
    for attempt_id in 0..scenario.attempts {
        let record = tanglepick_core::controller::run_attempt(
            &mut world,
            &config,
            &mut thresholds,
            scenario.policy,
            attempt_id as u64,
            &mut sink,
        );
        for (k, trace) in record.traces.iter().enumerate() {
            let name = format!("attempt{:03}_{:02}_{:?}.jsonl", attempt_id, k, trace.phase);
            let file = fs::File::create(traces_dir.join(name.to_lowercase()))?;
            let mut w = BufWriter::new(file);
            tanglepick_core::signal::write_trace_jsonl(trace, &mut w)?;
            w.flush()?;
        }
        records.push(record);
    }
    sink.finish()?;
    let summary = summarize(&records)?;
    write_outputs(&args.out_dir, &summary)?;
    println!(
        "scenario `{}`: {} attempts, {} successes",
        scenario.name, summary.attempts, summary.successes
    );
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let config = ControllerConfig { keep_traces: false, ..ControllerConfig::default() };
    let break_gains = [0.06, 0.12, 0.24];
    let slip_gains = [0.002, 0.004, 0.008];
    let defaults = WorldConfig::default();
    fs::create_dir_all(&args.out_dir)?;
    let mut report = String::from(
        "swing_break_gain,slip_gain,eject_gain,lift_g,ours_g,ours_a,ordering_ok,selected\n",
    );
    println!("break  slip   eject  lift_g ours_g ours_a ordering");
    for &bg in &break_gains {
        for &sg in &slip_gains {
            let mut rates = [0.0f64; 3];
            for (i, policy) in [Policy::LiftG, Policy::OursG, Policy::OursA].into_iter().enumerate()
            {
                let spec = TaskSpec {
                    task: TaskKind::Standard,
                    policy,
                    world: WorldConfig {
                        n_objects: args.objects,
                        rng_seed: args.seed,
                        swing_break_gain: bg,
                        slip_gain: sg,
                        ..WorldConfig::default()
                    },
                    episodes: args.episodes,
                    max_attempts: args.max_attempts,
                };
                let (summary, _) =
                    run_task(&spec, &config, &mut tanglepick_core::controller::NullSink)?;
                rates[i] = summary.success_rate;
            }
            let ordering_ok = rates[2] >= rates[1] && rates[1] >= rates[0] + 0.2;
            let selected = (bg - defaults.swing_break_gain).abs() < 1e-12
                && (sg - defaults.slip_gain).abs() < 1e-12;
            println!(
                "{bg:<6} {sg:<6} {:<6} {:<6.3} {:<6.3} {:<6.3} {ordering_ok}",
                defaults.eject_gain, rates[0], rates[1], rates[2]
            );
            report.push_str(&format!(
                "{bg},{sg},{},{:.6},{:.6},{:.6},{ordering_ok},{selected}\n",
                defaults.eject_gain, rates[0], rates[1], rates[2]
            ));
        }
    }
    let path = args.out_dir.join("calibration.csv");
    fs::write(&path, report)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_grasp(args: GraspArgs) -> Result<()> {
    let content = fs::read_to_string(&args.depth)
        .with_context(|| format!("reading {}", args.depth.display()))?;
    let depth = read_depth_pgm(content.as_bytes())?;
    let template = match &args.template_prefix {
        Some(prefix) => {
            let read = |suffix: &str| -> Result<(Mask, Option<f64>)> {
                let path = PathBuf::from(format!("{}{suffix}", prefix.display()));
                let content = fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Ok(read_mask_pgm(content.as_bytes())?)
            };
            let (contact, open_width) = read(".contact.pgm")?;
            let (collision, _) = read(".collision.pgm")?;
            let open_width = open_width.context("contact mask lacks an open_width comment")?;
            GripperTemplate::new(contact, collision, open_width)?
        }
        None => {
            let cfg = ControllerConfig::default();
            GripperTemplate::parallel_jaw(
                cfg.gripper_open_width,
                cfg.gripper_finger_width,
                cfg.gripper_jaw_len,
                depth.resolution,
            )?
        }
    };
    let mut candidates = detect_grasps(&depth, &template, args.rotations, args.heights, args.top_k)?;
    if args.alpha > 0.0 {
        candidates = rank_with_mid_bias(candidates, &depth, args.alpha);
    }
    fs::write(&args.out, candidates_to_csv(&candidates))?;
    println!("{} candidates -> {}", candidates.len(), args.out.display());
    Ok(())
}
