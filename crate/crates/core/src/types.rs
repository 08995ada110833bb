//! Shared domain types and their validation.
//!
//! Units are fixed across the crate: forces in newtons, torques in
//! newton-meters, angles in radians, angular velocities in radians per
//! second. Time is a dimensionless sample tick; the nominal tick period is
//! carried in the configuration and never enters control logic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("trace must contain at least one sample")]
    EmptyTrace,
    #[error("sample times must be strictly increasing (index {0})")]
    NonMonotonicTime(usize),
    #[error("sample {0} has a non-finite force")]
    NonFiniteForce(usize),
    #[error("samples must uniformly carry or omit the torque channel (index {0})")]
    MixedChannels(usize),
    #[error("angle out of range: {name} = {value} (limit {limit})")]
    AngleOutOfRange {
        name: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("angular velocity out of range: {0} (limit {1})")]
    OmegaOutOfRange(f64, f64),
    #[error("repetition count must be >= 1")]
    ZeroRepetitions,
    #[error("thresholds must satisfy 0 < f_fail < f_stop (f_stop {f_stop}, f_fail {f_fail})")]
    BadThresholds { f_stop: f64, f_fail: f64 },
    #[error("residual {0} must be positive")]
    NonPositiveResidual(&'static str),
    #[error("history values must be non-negative")]
    NegativeHistoryValue,
    #[error("outcome {outcome:?} is inconsistent with failure mode {mode:?}")]
    OutcomeModeMismatch {
        outcome: AttemptOutcome,
        mode: Option<FailureMode>,
    },
    #[error("transport counter {counter} does not match transport count {count}")]
    TransportCountMismatch { counter: u32, count: u32 },
}

/// Which monitored motion a trace was recorded during.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Lift,
    Transport,
    Regrasp,
}

/// One force-sensor sample. `tau` is the wrist-torque channel, present only
/// while the regrasp end-selection records both wrist poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    /// Sample tick, strictly increasing within a trace.
    pub t: u64,
    /// Vertical force in newtons.
    pub f_z: f64,
    /// Wrist torque in newton-meters.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau: Option<f64>,
}

/// An ordered, non-empty force recording for one motion phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceTrace {
    pub phase: Phase,
    samples: Vec<ForceSample>,
}

impl ForceTrace {
    /// Validates and wraps a sample sequence: non-empty, strictly increasing
    /// ticks, finite forces, and a uniform channel layout.
    pub fn new(phase: Phase, samples: Vec<ForceSample>) -> Result<Self, ValidationError> {
        if samples.is_empty() {
            return Err(ValidationError::EmptyTrace);
        }
        let has_tau = samples[0].tau.is_some();
        for (i, s) in samples.iter().enumerate() {
            if !s.f_z.is_finite() {
                return Err(ValidationError::NonFiniteForce(i));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(ValidationError::NonMonotonicTime(i));
            }
            if s.tau.is_some() != has_tau {
                return Err(ValidationError::MixedChannels(i));
            }
        }
        Ok(Self { phase, samples })
    }

    /// Builds a torque-free trace from raw forces, ticking from zero.
    pub fn from_forces(phase: Phase, f_z: &[f64]) -> Result<Self, ValidationError> {
        Self::new(
            phase,
            f_z.iter()
                .enumerate()
                .map(|(i, &f)| ForceSample {
                    t: i as u64,
                    f_z: f,
                    tau: None,
                })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[ForceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty() // never true by construction
    }

    /// Force of the final sample.
    pub fn terminal_force(&self) -> f64 {
        self.samples[self.samples.len() - 1].f_z
    }

    pub fn forces(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.f_z)
    }
}

/// Swing primitive parameters: three joint angles, a shared angular
/// velocity, and a repetition count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingParams {
    /// Yaw ("spinning") angle of the last wrist joint, radians.
    pub theta3: f64,
    /// Roll angle, radians.
    pub theta4: f64,
    /// Pitch angle, radians.
    pub theta5: f64,
    /// Angular velocity across all joints, radians per second.
    pub omega: f64,
    /// Number of repetitions.
    pub n: u32,
}

impl SwingParams {
    /// Checks ranges against the configured joint and velocity limits.
    pub fn validate(&self, angle_max: f64, omega_max: f64) -> Result<(), ValidationError> {
        for (name, value) in [
            ("theta3", self.theta3),
            ("theta4", self.theta4),
            ("theta5", self.theta5),
        ] {
            if !(0.0..=angle_max).contains(&value) || !value.is_finite() {
                return Err(ValidationError::AngleOutOfRange {
                    name,
                    value,
                    limit: angle_max,
                });
            }
        }
        if !(self.omega > 0.0 && self.omega <= omega_max) {
            return Err(ValidationError::OmegaOutOfRange(self.omega, omega_max));
        }
        if self.n < 1 {
            return Err(ValidationError::ZeroRepetitions);
        }
        Ok(())
    }

    /// Sum of the three joint angles, the "energy" term of the swing.
    pub fn angle_sum(&self) -> f64 {
        self.theta3 + self.theta4 + self.theta5
    }
}

/// Mutable tuner state: the two force thresholds, their residuals, and the
/// history of delivered terminal forces driving the convergence test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    /// Stop threshold: crossing it during lift or transport signals
    /// entanglement, newtons.
    pub f_stop: f64,
    /// Fail threshold: a terminal transport force below it indicates a
    /// single carried object, newtons.
    pub f_fail: f64,
    /// Residual force subtracted from `f_stop` on tuning steps, newtons.
    pub delta_f: f64,
    /// Residual angle added to swing joints on tuning steps, radians.
    pub delta_theta: f64,
    /// Terminal transport forces of completed deliveries, newtons.
    pub history: Vec<f64>,
    /// Set once the delivered-force history has plateaued; `f_fail` is
    /// frozen afterwards.
    pub f_fail_converged: bool,
}

impl ThresholdState {
    pub fn new(
        f_stop: f64,
        f_fail: f64,
        delta_f: f64,
        delta_theta: f64,
    ) -> Result<Self, ValidationError> {
        let state = Self {
            f_stop,
            f_fail,
            delta_f,
            delta_theta,
            history: Vec::new(),
            f_fail_converged: false,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(self.f_fail > 0.0 && self.f_fail < self.f_stop) {
            return Err(ValidationError::BadThresholds {
                f_stop: self.f_stop,
                f_fail: self.f_fail,
            });
        }
        if !(self.delta_f > 0.0) {
            return Err(ValidationError::NonPositiveResidual("delta_f"));
        }
        if !(self.delta_theta > 0.0) {
            return Err(ValidationError::NonPositiveResidual("delta_theta"));
        }
        if self.history.iter().any(|&v| v < 0.0) {
            return Err(ValidationError::NegativeHistoryValue);
        }
        Ok(())
    }

    /// Appends a delivered terminal force to the history.
    pub fn push_history(&mut self, terminal_force: f64) {
        self.history.push(terminal_force.max(0.0));
    }
}

/// Ground-truth result of one picking attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    /// Exactly one object landed in the goal bin.
    SuccessSingle,
    /// Nothing was transported.
    FailNothing,
    /// More than one object landed in the goal bin.
    FailMultiple,
    /// The per-attempt loop cap expired without a delivery.
    Aborted,
}

/// The four failure modes of the picking policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    GraspFailure,
    SwingFailure,
    RegraspFailure,
    RecoveryFailure,
}

/// Per-primitive execution counters within one attempt. The mandatory
/// pre-transport spin is logged but not counted as a disentangling swing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveCounts {
    pub lift: u32,
    pub swing: u32,
    pub regrasp: u32,
    pub transport: u32,
}

/// Full record of one attempt: outcome, failure mode, primitive counters,
/// recorded traces, and the tuner state after the attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt_id: u64,
    pub outcome: AttemptOutcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure_mode: Option<FailureMode>,
    pub counts: PrimitiveCounts,
    pub n_transport: u32,
    /// Recorded lift/transport traces, empty when trace keeping is disabled.
    pub traces: Vec<ForceTrace>,
    pub thresholds_after: ThresholdState,
}

impl AttemptRecord {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mode_ok = match self.outcome {
            AttemptOutcome::SuccessSingle => self.failure_mode.is_none(),
            AttemptOutcome::FailNothing | AttemptOutcome::FailMultiple => {
                self.failure_mode.is_some()
            }
            AttemptOutcome::Aborted => true,
        };
        if !mode_ok {
            return Err(ValidationError::OutcomeModeMismatch {
                outcome: self.outcome,
                mode: self.failure_mode,
            });
        }
        if self.counts.transport != self.n_transport {
            return Err(ValidationError::TransportCountMismatch {
                counter: self.n_transport,
                count: self.counts.transport,
            });
        }
        self.thresholds_after.validate()
    }
}
