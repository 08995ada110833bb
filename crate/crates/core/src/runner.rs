//! Experiment runner: executes the emptying and standard tasks over seeded
//! episodes and aggregates per-primitive counts, failure histograms and
//! threshold trajectories.
//!
//! Episode seeds derive as `base_seed ^ splitmix64(episode_index)`; the
//! standard task reloads the bin with a further derived seed after every
//! successful delivery. Thresholds persist across attempts and reloads
//! within an episode, never across episodes. Runs are sequential and the
//! log stream is byte-deterministic for a given spec.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ControllerConfig;
use crate::controller::{run_attempt, LogLine, LogSink, Policy, LOG_SCHEMA};
use crate::sim::{init_world, SimError, WorldConfig};
use crate::types::{AttemptOutcome, AttemptRecord, FailureMode, PrimitiveCounts};

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("episodes must be >= 1")]
    NoEpisodes,
    #[error("max_attempts must be >= 1")]
    NoAttempts,
    #[error("world config: {0}")]
    World(#[from] SimError),
    #[error("no records to summarize")]
    NoRecords,
}

/// Which experiment protocol an episode follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Pick until the bin is empty (or attempts run out).
    Emptying,
    /// Reload and reshuffle the bin after every successful pick, keeping
    /// the entanglement pressure high.
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: TaskKind,
    pub policy: Policy,
    pub world: WorldConfig,
    pub episodes: usize,
    pub max_attempts: usize,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.episodes < 1 {
            return Err(TaskError::NoEpisodes);
        }
        if self.max_attempts < 1 {
            return Err(TaskError::NoAttempts);
        }
        self.world.validate()?;
        Ok(())
    }

    /// Default attempt budget: three per object.
    pub fn default_max_attempts(n_objects: usize) -> usize {
        (3 * n_objects).max(1)
    }
}

/// Failure counts keyed by mode, with aborted attempts tracked as their own
/// bucket so the histogram total always matches the failure count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureHistogram {
    pub grasp: usize,
    pub swing: usize,
    pub regrasp: usize,
    pub recovery: usize,
    pub aborted: usize,
}

impl FailureHistogram {
    pub fn total(&self) -> usize {
        self.grasp + self.swing + self.regrasp + self.recovery + self.aborted
    }
}

/// Per-attempt threshold snapshot for the tuning trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub attempt_id: u64,
    pub f_stop: f64,
    pub f_fail: f64,
}

/// Aggregated results of a task run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub attempts: usize,
    pub successes: usize,
    /// successes / (successes + failures); failures are every
    /// non-successful outcome.
    pub success_rate: f64,
    pub counts: PrimitiveCounts,
    pub failure_histogram: FailureHistogram,
    pub threshold_trajectories: Vec<ThresholdPoint>,
    pub episodes: usize,
    /// Episodes whose task goal was reached (emptying: bin emptied;
    /// standard: always counted as complete).
    pub completed_episodes: usize,
}

/// Aggregates attempt records into rates, per-primitive counters, the
/// failure histogram, and the threshold trajectory. Episode fields are
/// filled by the caller that knows the episode structure.
pub fn summarize(records: &[AttemptRecord]) -> Result<RunSummary, TaskError> {
    if records.is_empty() {
        return Err(TaskError::NoRecords);
    }
    let mut successes = 0usize;
    let mut counts = PrimitiveCounts::default();
    let mut histogram = FailureHistogram::default();
    let mut trajectory = Vec::with_capacity(records.len());
    for r in records {
        match r.outcome {
            AttemptOutcome::SuccessSingle => successes += 1,
            AttemptOutcome::Aborted => histogram.aborted += 1,
            AttemptOutcome::FailNothing | AttemptOutcome::FailMultiple => {
                match r.failure_mode.expect("failed attempts carry a mode") {
                    FailureMode::GraspFailure => histogram.grasp += 1,
                    FailureMode::SwingFailure => histogram.swing += 1,
                    FailureMode::RegraspFailure => histogram.regrasp += 1,
                    FailureMode::RecoveryFailure => histogram.recovery += 1,
                }
            }
        }
        counts.lift += r.counts.lift;
        counts.swing += r.counts.swing;
        counts.regrasp += r.counts.regrasp;
        counts.transport += r.counts.transport;
        trajectory.push(ThresholdPoint {
            attempt_id: r.attempt_id,
            f_stop: r.thresholds_after.f_stop,
            f_fail: r.thresholds_after.f_fail,
        });
    }
    Ok(RunSummary {
        attempts: records.len(),
        successes,
        success_rate: successes as f64 / records.len() as f64,
        counts,
        failure_histogram: histogram,
        threshold_trajectories: trajectory,
        episodes: 0,
        completed_episodes: 0,
    })
}

/// splitmix64; the episode-seed mixer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Runs a task spec to completion, emitting the full log stream into
/// `sink`. Returns the aggregated summary (episode fields included). The
/// same spec and config always reproduce the same records and log bytes.
pub fn run_task(
    spec: &TaskSpec,
    config: &ControllerConfig,
    sink: &mut dyn LogSink,
) -> Result<(RunSummary, Vec<AttemptRecord>), TaskError> {
    spec.validate()?;
    let mut records: Vec<AttemptRecord> = Vec::new();
    let mut attempt_id = 0u64;
    let mut completed = 0usize;

    for episode in 0..spec.episodes {
        let episode_seed = spec.world.rng_seed ^ splitmix64(episode as u64);
        sink.emit(&LogLine::Episode { schema: LOG_SCHEMA, index: episode, seed: episode_seed });
        let mut world_cfg = spec.world.clone();
        world_cfg.rng_seed = episode_seed;
        let mut world = init_world(&world_cfg)?;
        let mut thresholds = config.initial_thresholds();
        let mut reloads = 0u64;

        let mut episode_complete = matches!(spec.task, TaskKind::Standard);
        for _ in 0..spec.max_attempts {
            if spec.task == TaskKind::Emptying && world.remaining() == 0 {
                episode_complete = true;
                break;
            }
            let record = run_attempt(&mut world, config, &mut thresholds, spec.policy, attempt_id, sink);
            attempt_id += 1;
            let success = record.outcome == AttemptOutcome::SuccessSingle;
            records.push(record);

            if spec.task == TaskKind::Standard && success {
                // Reload and reshuffle; thresholds carry over.
                reloads += 1;
                let mut reload_cfg = spec.world.clone();
                reload_cfg.rng_seed = episode_seed ^ splitmix64(reloads);
                world = init_world(&reload_cfg)?;
            }
        }
        if spec.task == TaskKind::Emptying && world.remaining() == 0 {
            episode_complete = true;
        }
        if episode_complete {
            completed += 1;
        }
        sink.emit(&LogLine::EpisodeEnd {
            schema: LOG_SCHEMA,
            index: episode,
            completed: episode_complete,
        });
    }

    let mut summary = summarize(&records)?;
    summary.episodes = spec.episodes;
    summary.completed_episodes = completed;
    Ok((summary, records))
}

/// `summary.csv` content: `metric,value` rows.
pub fn summary_csv(summary: &RunSummary) -> String {
    let mut out = String::from("metric,value\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k},{v}");
    };
    kv("attempts", summary.attempts.to_string());
    kv("successes", summary.successes.to_string());
    kv("success_rate", format!("{:.6}", summary.success_rate));
    kv("lift", summary.counts.lift.to_string());
    kv("swing", summary.counts.swing.to_string());
    kv("regrasp", summary.counts.regrasp.to_string());
    kv("transport", summary.counts.transport.to_string());
    kv("fail_grasp", summary.failure_histogram.grasp.to_string());
    kv("fail_swing", summary.failure_histogram.swing.to_string());
    kv("fail_regrasp", summary.failure_histogram.regrasp.to_string());
    kv("fail_recovery", summary.failure_histogram.recovery.to_string());
    kv("aborted", summary.failure_histogram.aborted.to_string());
    kv("episodes", summary.episodes.to_string());
    kv("completed_episodes", summary.completed_episodes.to_string());
    out
}

/// `thresholds.csv` content: the per-attempt threshold trajectory.
pub fn thresholds_csv(summary: &RunSummary) -> String {
    let mut out = String::from("attempt_id,f_stop,f_fail\n");
    for p in &summary.threshold_trajectories {
        let _ = writeln!(out, "{},{},{}", p.attempt_id, p.f_stop, p.f_fail);
    }
    out
}

/// Serializes a log stream as JSONL.
pub fn log_to_jsonl(lines: &[LogLine]) -> String {
    let mut out = String::new();
    for line in lines {
        let _ = writeln!(out, "{}", serde_json::to_string(line).expect("log lines serialize"));
    }
    out
}

/// Parses an attempts.jsonl stream back into log lines.
pub fn parse_jsonl(content: &str) -> Result<Vec<LogLine>, serde_json::Error> {
    content
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Extracts the attempt records from a parsed log stream.
pub fn records_from_log(lines: &[LogLine]) -> Vec<AttemptRecord> {
    lines
        .iter()
        .filter_map(|l| match l {
            LogLine::Attempt { record, .. } => Some(record.clone()),
            _ => None,
        })
        .collect()
}
