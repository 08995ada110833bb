//! Force-trace processing: median filtering, gradient estimation, and
//! threshold-event detection for the lift and transport phases.
//!
//! Detection always runs on the median-filtered trace, for both the stop
//! and the fail decision. At the trace edges the filter uses asymmetric
//! clipped windows; an even-length window takes the lower median.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::types::{ForceSample, ForceTrace, Phase, ThresholdState, ValidationError};

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("filter window must be odd, >= 1 and <= trace length (window {window}, len {len})")]
    BadWindow { window: usize, len: usize },
    #[error("gradient requires at least two samples")]
    TraceTooShort,
    #[error("expected a {expected:?}-phase trace, got {got:?}")]
    WrongPhase { expected: Phase, got: Phase },
    #[error("invalid trace: {0}")]
    InvalidTrace(#[from] ValidationError),
    #[error("trace i/o: {0}")]
    Io(String),
}

/// Classification of a monitored lift.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LiftEvent {
    /// The filtered force crossed `f_stop`; `stop_index` is the position of
    /// the first crossing sample and `terminal_force` the filtered value
    /// there.
    StopEntangled { stop_index: usize, terminal_force: f64 },
    /// The filtered force plateaued below `f_fail`: the gripper holds an
    /// object end that barely loads the sensor.
    GradientNearZero { terminal_force: f64 },
    /// A plain lift without a stop.
    CleanLift { terminal_force: f64 },
}

impl LiftEvent {
    pub fn terminal_force(&self) -> f64 {
        match *self {
            LiftEvent::StopEntangled { terminal_force, .. }
            | LiftEvent::GradientNearZero { terminal_force }
            | LiftEvent::CleanLift { terminal_force } => terminal_force,
        }
    }
}

/// Classification of a monitored transport.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransportEvent {
    /// The filtered force crossed `f_stop` at this sample position.
    StopEntangled { stop_index: usize },
    /// The transport finished; the filtered terminal force is the value
    /// appended to the tuner history and compared against `f_fail`.
    Delivered { terminal_force: f64 },
}

/// Median-filters the force channel. Each output sample is the median of a
/// window centered on it; windows are clipped at the trace edges and
/// even-length windows take the lower median. Ticks, torque channel values
/// and phase are preserved.
pub fn median_filter(trace: &ForceTrace, window: usize) -> Result<ForceTrace, SignalError> {
    let n = trace.len();
    if window == 0 || window % 2 == 0 || window > n {
        return Err(SignalError::BadWindow { window, len: n });
    }
    let half = window / 2;
    let samples = trace.samples();
    let mut scratch: Vec<f64> = Vec::with_capacity(window);
    let filtered: Vec<ForceSample> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            scratch.clear();
            scratch.extend(samples[lo..hi].iter().map(|s| s.f_z));
            let mid = (scratch.len() - 1) / 2;
            scratch.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
            ForceSample {
                f_z: scratch[mid],
                ..samples[i]
            }
        })
        .collect();
    Ok(ForceTrace::new(trace.phase, filtered).expect("filtering preserves trace invariants"))
}

/// Finite-difference gradient of the force channel in newtons per tick:
/// central differences in the interior, one-sided at the ends. Output length
/// equals input length.
pub fn gradient(trace: &ForceTrace) -> Result<Vec<f64>, SignalError> {
    let s = trace.samples();
    let n = s.len();
    if n < 2 {
        return Err(SignalError::TraceTooShort);
    }
    let slope = |a: &ForceSample, b: &ForceSample| (b.f_z - a.f_z) / ((b.t - a.t) as f64);
    let mut g = Vec::with_capacity(n);
    g.push(slope(&s[0], &s[1]));
    for i in 1..n - 1 {
        g.push(slope(&s[i - 1], &s[i + 1]));
    }
    g.push(slope(&s[n - 2], &s[n - 1]));
    Ok(g)
}

/// Classifies a lift trace.
///
/// Order of tests on the filtered trace: (a) first crossing of `f_stop`
/// wins; (b) otherwise, if the mean |gradient| over the trailing
/// `tail_fraction` of the trace is at most `grad_eps` *and* the terminal
/// force is below `f_fail`, the grip holds an object end; (c) otherwise the
/// lift is clean. The terminal-force guard in (b) keeps a fully lifted
/// heavy object from being mistaken for an end grasp.
pub fn detect_lift_event(
    trace: &ForceTrace,
    thresholds: &ThresholdState,
    filter_window: usize,
    grad_eps: f64,
    tail_fraction: f64,
) -> Result<LiftEvent, SignalError> {
    if trace.phase != Phase::Lift {
        return Err(SignalError::WrongPhase {
            expected: Phase::Lift,
            got: trace.phase,
        });
    }
    let filtered = median_filter(trace, filter_window)?;
    if let Some(i) = filtered
        .samples()
        .iter()
        .position(|s| s.f_z >= thresholds.f_stop)
    {
        return Ok(LiftEvent::StopEntangled {
            stop_index: i,
            terminal_force: filtered.samples()[i].f_z,
        });
    }
    let g = gradient(&filtered)?;
    let tail_len = ((filtered.len() as f64 * tail_fraction).ceil() as usize).max(1);
    let tail = &g[g.len() - tail_len.min(g.len())..];
    let tail_mean = tail.iter().map(|v| v.abs()).sum::<f64>() / tail.len() as f64;
    let terminal = filtered.terminal_force();
    if tail_mean <= grad_eps && terminal < thresholds.f_fail {
        Ok(LiftEvent::GradientNearZero { terminal_force: terminal })
    } else {
        Ok(LiftEvent::CleanLift { terminal_force: terminal })
    }
}

/// Classifies a transport trace: stop at the first filtered crossing of
/// `f_stop`, otherwise delivered with the filtered terminal force.
pub fn detect_transport_event(
    trace: &ForceTrace,
    thresholds: &ThresholdState,
    filter_window: usize,
) -> Result<TransportEvent, SignalError> {
    if trace.phase != Phase::Transport {
        return Err(SignalError::WrongPhase {
            expected: Phase::Transport,
            got: trace.phase,
        });
    }
    let filtered = median_filter(trace, filter_window)?;
    if let Some(i) = filtered
        .samples()
        .iter()
        .position(|s| s.f_z >= thresholds.f_stop)
    {
        return Ok(TransportEvent::StopEntangled { stop_index: i });
    }
    Ok(TransportEvent::Delivered {
        terminal_force: filtered.terminal_force(),
    })
}

/// Writes a trace as JSON lines, one sample per line with fields
/// `{t, f_z, tau?}`.
pub fn write_trace_jsonl<W: Write>(trace: &ForceTrace, mut out: W) -> Result<(), SignalError> {
    for sample in trace.samples() {
        let line = serde_json::to_string(sample).map_err(|e| SignalError::Io(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| SignalError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Reads a JSONL trace written by [`write_trace_jsonl`]. The phase is not
/// part of the line format and must be supplied by the caller.
pub fn read_trace_jsonl<R: BufRead>(phase: Phase, input: R) -> Result<ForceTrace, SignalError> {
    let mut samples = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| SignalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: ForceSample =
            serde_json::from_str(&line).map_err(|e| SignalError::Io(e.to_string()))?;
        samples.push(sample);
    }
    Ok(ForceTrace::new(phase, samples)?)
}
