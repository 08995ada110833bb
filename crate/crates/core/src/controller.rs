//! The closed-loop picking policy: an explicit finite state machine over
//! the attempt workflow, swing-parameter scheduling, the regrasp
//! end-selection, and the online threshold tuner.
//!
//! One attempt runs: grasp detection, then a monitored loop of
//! lift -> (swing | regrasp | nothing) -> mandatory pre-transport spin ->
//! monitored transport. A transport that finishes below `f_fail` delivers;
//! anything else tunes the thresholds, grows the swing angles, and loops,
//! up to a per-attempt iteration cap.
//!
//! Outcomes are ground truth: the world reports how many objects actually
//! landed in the goal bin, so a missed multi-object carry is recorded as a
//! recovery failure even though the controller believed it succeeded.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ControllerConfig;
use crate::grasp::{detect_grasps, rank_with_mid_bias, DepthMap, GraspCandidate, GripperTemplate};
use crate::signal::{detect_lift_event, detect_transport_event, LiftEvent, TransportEvent};
use crate::sim::{ObjectId, RegraspOutcome, SimError, SwingOutcome};
use crate::types::{
    AttemptOutcome, AttemptRecord, FailureMode, ForceTrace, PrimitiveCounts, SwingParams,
    ThresholdState,
};

#[derive(Debug, Error, PartialEq)]
pub enum FsmError {
    #[error("illegal transition: {phase:?} on {event:?}")]
    IllegalTransition { phase: ControllerPhase, event: ControlEvent },
}

/// Attempt phases. `Done` is terminal per attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerPhase {
    Idle,
    Grasping,
    Lifting,
    Swinging,
    Regrasping,
    PreTransportSpin,
    Transporting,
    Done,
}

/// Events that drive the attempt state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlEvent {
    Start,
    GraspOk,
    /// No candidate, or the chosen spot was bare.
    GraspFailed,
    /// Lift crossed `f_stop`.
    LiftStop,
    /// Near-zero lift gradient, or more than two transports this attempt.
    RegraspNeeded,
    LiftClean,
    SwingOk,
    SwingSlipped,
    RegraspOk,
    RegraspFailed,
    SpinDone,
    SpinSlipped,
    TransportStopped,
    /// Transport finished with terminal force below `f_fail`.
    DeliveredLight,
    /// Transport finished at or above `f_fail`; the robot keeps holding.
    DeliveredHeavy,
    /// The per-attempt iteration cap expired.
    CapExhausted,
}

impl ControllerPhase {
    /// The complete transition table. Any pair not listed is rejected.
    pub fn apply(self, event: ControlEvent) -> Result<ControllerPhase, FsmError> {
        use ControlEvent as E;
        use ControllerPhase as P;
        let next = match (self, event) {
            (P::Idle, E::Start) => P::Grasping,
            (P::Grasping, E::GraspOk) => P::Lifting,
            (P::Grasping, E::GraspFailed) => P::Done,
            (P::Lifting, E::LiftStop) => P::Swinging,
            (P::Lifting, E::RegraspNeeded) => P::Regrasping,
            (P::Lifting, E::LiftClean) => P::PreTransportSpin,
            (P::Swinging, E::SwingOk) => P::PreTransportSpin,
            (P::Swinging, E::SwingSlipped) => P::Done,
            (P::Regrasping, E::RegraspOk) => P::PreTransportSpin,
            (P::Regrasping, E::RegraspFailed) => P::Done,
            (P::PreTransportSpin, E::SpinDone) => P::Transporting,
            (P::PreTransportSpin, E::SpinSlipped) => P::Done,
            (P::Transporting, E::TransportStopped) => P::Lifting,
            (P::Transporting, E::DeliveredLight) => P::Done,
            (P::Transporting, E::DeliveredHeavy) => P::Lifting,
            (P::Transporting, E::CapExhausted) => P::Done,
            (phase, event) => return Err(FsmError::IllegalTransition { phase, event }),
        };
        Ok(next)
    }
}

/// Torques recorded at the two wrist poses of the regrasp spin check and
/// the selected end. An exact tie selects A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinCheckResult {
    pub torque_pose_a: f64,
    pub torque_pose_b: f64,
    pub chosen_end: End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum End {
    A,
    B,
}

impl SpinCheckResult {
    pub fn from_torques(torque_pose_a: f64, torque_pose_b: f64) -> Self {
        let chosen_end = if torque_pose_a.abs() <= torque_pose_b.abs() {
            End::A
        } else {
            End::B
        };
        Self { torque_pose_a, torque_pose_b, chosen_end }
    }
}

/// Grasp ranking policy of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Open loop: grasp, lift and transport without monitoring.
    LiftG,
    /// Closed loop on the raw graspability ranking.
    OursG,
    /// Closed loop with the middle-of-object re-ranking.
    OursA,
}

/// What the controller needs from a world. The simulator implements this;
/// tests use scripted mocks.
pub trait PickWorld {
    fn observe(&mut self) -> DepthMap;
    /// Closes the gripper at an image-plane candidate; false means the spot
    /// was bare.
    fn try_grasp(&mut self, candidate: &GraspCandidate) -> Result<bool, SimError>;
    fn lift(&mut self, thresholds: &ThresholdState) -> Result<ForceTrace, SimError>;
    fn swing(&mut self, params: &SwingParams) -> Result<SwingOutcome, SimError>;
    fn regrasp(&mut self) -> Result<RegraspOutcome, SimError>;
    fn transport(&mut self, thresholds: &ThresholdState) -> Result<ForceTrace, SimError>;
    fn deliver(&mut self) -> Result<Vec<ObjectId>, SimError>;
    fn release(&mut self) -> Result<(), SimError>;
    fn remaining(&self) -> usize;
}

impl PickWorld for crate::sim::BinState {
    fn observe(&mut self) -> DepthMap {
        crate::sim::BinState::observe(self)
    }

    fn try_grasp(&mut self, candidate: &GraspCandidate) -> Result<bool, SimError> {
        self.grasp_at(candidate.u, candidate.v)
    }

    fn lift(&mut self, thresholds: &ThresholdState) -> Result<ForceTrace, SimError> {
        self.synth_lift_trace(thresholds)
    }

    fn swing(&mut self, params: &SwingParams) -> Result<SwingOutcome, SimError> {
        self.apply_swing(params)
    }

    fn regrasp(&mut self) -> Result<RegraspOutcome, SimError> {
        self.apply_regrasp()
    }

    fn transport(&mut self, thresholds: &ThresholdState) -> Result<ForceTrace, SimError> {
        self.synth_transport_trace(thresholds)
    }

    fn deliver(&mut self) -> Result<Vec<ObjectId>, SimError> {
        crate::sim::BinState::deliver(self)
    }

    fn release(&mut self) -> Result<(), SimError> {
        crate::sim::BinState::release(self)
    }

    fn remaining(&self) -> usize {
        crate::sim::BinState::remaining(self)
    }
}

/// One JSONL log line. `schema` is bumped on any breaking layout change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Episode {
        schema: u32,
        index: usize,
        seed: u64,
    },
    EpisodeEnd {
        schema: u32,
        index: usize,
        completed: bool,
    },
    Primitive {
        schema: u32,
        attempt_id: u64,
        iteration: u32,
        primitive: Primitive,
        event: String,
        f_stop: f64,
        f_fail: f64,
    },
    Attempt {
        schema: u32,
        record: AttemptRecord,
    },
}

pub const LOG_SCHEMA: u32 = 1;

/// The primitive a log line describes, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Primitive {
    Grasp { u: usize, v: usize, rotation: f64, score: f64 },
    Lift,
    Swing { params: SwingParams },
    Spin { params: SwingParams },
    Regrasp { spin_check: SpinCheckResult },
    Transport,
    Deliver { count: usize },
}

/// Receives log lines as they are produced.
pub trait LogSink {
    fn emit(&mut self, line: &LogLine);
}

/// Collects everything; useful in tests and for post-hoc serialization.
impl LogSink for Vec<LogLine> {
    fn emit(&mut self, line: &LogLine) {
        self.push(line.clone());
    }
}

/// Discards everything.
pub struct NullSink;

impl LogSink for NullSink {
    fn emit(&mut self, _line: &LogLine) {}
}

/// Increments every swing joint by the residual angle, clamped to the joint
/// limit so the implied motion stays within the arm's velocity envelope.
/// Velocity and repetition count are untouched.
pub fn schedule_swing(current: &SwingParams, delta_theta: f64, angle_max: f64) -> SwingParams {
    SwingParams {
        theta3: (current.theta3 + delta_theta).min(angle_max),
        theta4: (current.theta4 + delta_theta).min(angle_max),
        theta5: (current.theta5 + delta_theta).min(angle_max),
        ..*current
    }
}

/// Which stop pattern the finished loop iteration showed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttemptContext {
    /// No stop during lift or transport and the delivery succeeded: the
    /// fail threshold learns from the delivered weight history.
    NoStopEither,
    /// Clean lift but a stop during transport: the stop threshold was not
    /// sensitive enough and is lowered.
    NoStopLiftStopTransport,
    /// Any other pattern: no tuning.
    Other,
}

/// Online tuning step.
///
/// `NoStopEither`: once the trailing `plateau_window` delivered forces lie
/// within `plateau_eps` of each other, `f_fail` snaps to their mean plus
/// `fail_margin` and freezes. `NoStopLiftStopTransport`: `f_stop` drops by
/// `delta_f`, floored at `f_fail + delta_f` so the threshold ordering
/// survives. `Other`: no change.
pub fn update_thresholds(
    thresholds: &mut ThresholdState,
    context: AttemptContext,
    config: &ControllerConfig,
) {
    match context {
        AttemptContext::NoStopEither => {
            if thresholds.f_fail_converged {
                return;
            }
            let m = config.plateau_window;
            if thresholds.history.len() < m {
                return;
            }
            let tail = &thresholds.history[thresholds.history.len() - m..];
            let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < config.plateau_eps {
                let mean = tail.iter().sum::<f64>() / m as f64;
                // Keep the threshold ordering even on a pathological
                // plateau.
                let new_fail = (mean + config.fail_margin).min(thresholds.f_stop - thresholds.delta_f);
                if new_fail > 0.0 {
                    thresholds.f_fail = new_fail;
                    thresholds.f_fail_converged = true;
                }
            }
        }
        AttemptContext::NoStopLiftStopTransport => {
            let floor = thresholds.f_fail + thresholds.delta_f;
            thresholds.f_stop = (thresholds.f_stop - thresholds.delta_f).max(floor);
        }
        AttemptContext::Other => {}
    }
}

/// Terminal decision for a finished transport.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransportDecision {
    /// Terminal force below `f_fail`: deliver and finish.
    FinishDelivery,
    /// Delivered heavy: hold on, tune, loop.
    ContinueHeavy,
    /// Stopped mid-transport: loop.
    ContinueStopped,
}

/// Maps a transport event onto the loop decision.
pub fn classify_outcome(event: &TransportEvent, thresholds: &ThresholdState) -> TransportDecision {
    match event {
        TransportEvent::Delivered { terminal_force } if *terminal_force < thresholds.f_fail => {
            TransportDecision::FinishDelivery
        }
        TransportEvent::Delivered { .. } => TransportDecision::ContinueHeavy,
        TransportEvent::StopEntangled { .. } => TransportDecision::ContinueStopped,
    }
}

struct AttemptState {
    phase: ControllerPhase,
    counts: PrimitiveCounts,
    traces: Vec<ForceTrace>,
    n_transport: u32,
    iteration: u32,
}

impl AttemptState {
    fn step(&mut self, event: ControlEvent) {
        self.phase = self
            .phase
            .apply(event)
            .expect("controller drives only legal transitions");
    }
}

/// Runs one picking attempt against a world.
///
/// `thresholds` carries the tuner state across attempts. Simulation errors
/// surface as `Aborted` records; an empty candidate list or a bare grasp
/// spot records a grasp failure.
pub fn run_attempt<W: PickWorld>(
    world: &mut W,
    config: &ControllerConfig,
    thresholds: &mut ThresholdState,
    policy: Policy,
    attempt_id: u64,
    sink: &mut dyn LogSink,
) -> AttemptRecord {
    match policy {
        Policy::LiftG => run_open_loop(world, config, thresholds, attempt_id, sink),
        Policy::OursG | Policy::OursA => {
            run_closed_loop(world, config, thresholds, policy, attempt_id, sink)
        }
    }
}

fn finish_record(
    attempt_id: u64,
    outcome: AttemptOutcome,
    failure_mode: Option<FailureMode>,
    state: AttemptState,
    thresholds: &ThresholdState,
    config: &ControllerConfig,
    sink: &mut dyn LogSink,
) -> AttemptRecord {
    let record = AttemptRecord {
        attempt_id,
        outcome,
        failure_mode,
        counts: state.counts,
        n_transport: state.n_transport,
        traces: if config.keep_traces { state.traces } else { Vec::new() },
        thresholds_after: thresholds.clone(),
    };
    debug_assert!(record.validate().is_ok(), "attempt record violates invariants");
    sink.emit(&LogLine::Attempt { schema: LOG_SCHEMA, record: record.clone() });
    record
}

fn plan_grasp<W: PickWorld>(
    world: &mut W,
    config: &ControllerConfig,
    policy: Policy,
) -> Vec<GraspCandidate> {
    let depth = world.observe();
    let template = GripperTemplate::parallel_jaw(
        config.gripper_open_width,
        config.gripper_finger_width,
        config.gripper_jaw_len,
        depth.resolution,
    )
    .expect("validated gripper dimensions");
    let candidates = match detect_grasps(
        &depth,
        &template,
        config.n_rotations,
        config.n_heights,
        config.top_k,
    ) {
        Ok(c) => c,
        Err(_) => Vec::new(),
    };
    if policy == Policy::OursA {
        rank_with_mid_bias(candidates, &depth, config.mid_bias_alpha)
    } else {
        candidates
    }
}

fn run_closed_loop<W: PickWorld>(
    world: &mut W,
    config: &ControllerConfig,
    thresholds: &mut ThresholdState,
    policy: Policy,
    attempt_id: u64,
    sink: &mut dyn LogSink,
) -> AttemptRecord {
    let mut state = AttemptState {
        phase: ControllerPhase::Idle,
        counts: PrimitiveCounts::default(),
        traces: Vec::new(),
        n_transport: 0,
        iteration: 0,
    };
    let mut swing = config.initial_swing();

    let log_primitive =
        |sink: &mut dyn LogSink, state: &AttemptState, thresholds: &ThresholdState, primitive: Primitive, event: String| {
            sink.emit(&LogLine::Primitive {
                schema: LOG_SCHEMA,
                attempt_id,
                iteration: state.iteration,
                primitive,
                event,
                f_stop: thresholds.f_stop,
                f_fail: thresholds.f_fail,
            });
        };

    state.step(ControlEvent::Start);

    // Grasp detection and binding.
    let candidates = plan_grasp(world, config, policy);
    let Some(top) = candidates.first().copied() else {
        state.step(ControlEvent::GraspFailed);
        log_primitive(sink, &state, thresholds, Primitive::Grasp { u: 0, v: 0, rotation: 0.0, score: 0.0 }, "no_candidates".into());
        return finish_record(
            attempt_id,
            AttemptOutcome::FailNothing,
            Some(FailureMode::GraspFailure),
            state,
            thresholds,
            config,
            sink,
        );
    };
    let grasped = match world.try_grasp(&top) {
        Ok(g) => g,
        Err(_) => false,
    };
    log_primitive(
        sink,
        &state,
        thresholds,
        Primitive::Grasp { u: top.u, v: top.v, rotation: top.rotation, score: top.score },
        if grasped { "bound".into() } else { "missed".into() },
    );
    if !grasped {
        state.step(ControlEvent::GraspFailed);
        return finish_record(
            attempt_id,
            AttemptOutcome::FailNothing,
            Some(FailureMode::GraspFailure),
            state,
            thresholds,
            config,
            sink,
        );
    }
    state.step(ControlEvent::GraspOk);

    let abort = |state: AttemptState, thresholds: &mut ThresholdState, sink: &mut dyn LogSink, world: &mut W| {
        let _ = world.release();
        finish_record(attempt_id, AttemptOutcome::Aborted, None, state, thresholds, config, sink)
    };

    loop {
        state.iteration += 1;

        // Lift with monitoring.
        let lift_trace = match world.lift(thresholds) {
            Ok(t) => t,
            Err(_) => return abort(state, thresholds, sink, world),
        };
        state.counts.lift += 1;
        let lift_event = match detect_lift_event(
            &lift_trace,
            thresholds,
            config.filter_window,
            config.grad_eps,
            config.tail_fraction,
        ) {
            Ok(e) => e,
            Err(_) => return abort(state, thresholds, sink, world),
        };
        log_primitive(sink, &state, thresholds, Primitive::Lift, format!("{lift_event:?}"));
        state.traces.push(lift_trace);
        let stop_lift = matches!(lift_event, LiftEvent::StopEntangled { .. });

        // Branch order mirrors the attempt workflow: a stop always swings;
        // otherwise a near-zero gradient or a third transport failure
        // regrasps; otherwise proceed.
        if stop_lift {
            state.step(ControlEvent::LiftStop);
            let out = match world.swing(&swing) {
                Ok(o) => o,
                Err(_) => return abort(state, thresholds, sink, world),
            };
            state.counts.swing += 1;
            log_primitive(
                sink,
                &state,
                thresholds,
                Primitive::Swing { params: swing },
                format!("broke={} slipped={} ejected={:?}", out.edges_broken, out.slipped, out.ejected),
            );
            if out.slipped {
                state.step(ControlEvent::SwingSlipped);
                return finish_record(
                    attempt_id,
                    AttemptOutcome::FailNothing,
                    Some(FailureMode::SwingFailure),
                    state,
                    thresholds,
                    config,
                    sink,
                );
            }
            state.step(ControlEvent::SwingOk);
        } else if matches!(lift_event, LiftEvent::GradientNearZero { .. }) || state.n_transport > 2
        {
            state.step(ControlEvent::RegraspNeeded);
            let out = match world.regrasp() {
                Ok(o) => o,
                Err(_) => return abort(state, thresholds, sink, world),
            };
            state.counts.regrasp += 1;
            let spin_check = SpinCheckResult::from_torques(out.torque_a, out.torque_b);
            log_primitive(
                sink,
                &state,
                thresholds,
                Primitive::Regrasp { spin_check },
                format!("handoff_ok={} pulled_free={}", out.handoff_ok, out.pulled_free),
            );
            if !out.handoff_ok {
                state.step(ControlEvent::RegraspFailed);
                return finish_record(
                    attempt_id,
                    AttemptOutcome::FailNothing,
                    Some(FailureMode::RegraspFailure),
                    state,
                    thresholds,
                    config,
                    sink,
                );
            }
            state.step(ControlEvent::RegraspOk);
        } else {
            state.step(ControlEvent::LiftClean);
        }

        // Mandatory two-way spin before every transport.
        let spin = config.spin_params();
        let spin_out = match world.swing(&spin) {
            Ok(o) => o,
            Err(_) => return abort(state, thresholds, sink, world),
        };
        log_primitive(
            sink,
            &state,
            thresholds,
            Primitive::Spin { params: spin },
            format!("broke={} slipped={}", spin_out.edges_broken, spin_out.slipped),
        );
        if spin_out.slipped {
            state.step(ControlEvent::SpinSlipped);
            return finish_record(
                attempt_id,
                AttemptOutcome::FailNothing,
                Some(FailureMode::SwingFailure),
                state,
                thresholds,
                config,
                sink,
            );
        }
        state.step(ControlEvent::SpinDone);

        // Transport with monitoring.
        let transport_trace = match world.transport(thresholds) {
            Ok(t) => t,
            Err(_) => return abort(state, thresholds, sink, world),
        };
        state.counts.transport += 1;
        state.n_transport += 1;
        let transport_event = match detect_transport_event(&transport_trace, thresholds, config.filter_window)
        {
            Ok(e) => e,
            Err(_) => return abort(state, thresholds, sink, world),
        };
        log_primitive(sink, &state, thresholds, Primitive::Transport, format!("{transport_event:?}"));
        state.traces.push(transport_trace);

        match classify_outcome(&transport_event, thresholds) {
            TransportDecision::FinishDelivery => {
                let terminal = match transport_event {
                    TransportEvent::Delivered { terminal_force } => terminal_force,
                    TransportEvent::StopEntangled { .. } => unreachable!("delivery requires Delivered"),
                };
                // Every delivered terminal force joins the history; the fail
                // threshold only learns from stop-free rounds.
                thresholds.push_history(terminal);
                let context = if stop_lift {
                    AttemptContext::Other
                } else {
                    AttemptContext::NoStopEither
                };
                update_thresholds(thresholds, context, config);
                let delivered = match world.deliver() {
                    Ok(d) => d,
                    Err(_) => return abort(state, thresholds, sink, world),
                };
                log_primitive(
                    sink,
                    &state,
                    thresholds,
                    Primitive::Deliver { count: delivered.len() },
                    "finished".into(),
                );
                state.step(ControlEvent::DeliveredLight);
                let (outcome, mode) = if delivered.len() == 1 {
                    (AttemptOutcome::SuccessSingle, None)
                } else {
                    // The haptic check missed a multi-object carry.
                    (AttemptOutcome::FailMultiple, Some(FailureMode::RecoveryFailure))
                };
                return finish_record(attempt_id, outcome, mode, state, thresholds, config, sink);
            }
            TransportDecision::ContinueHeavy => {
                let terminal = match transport_event {
                    TransportEvent::Delivered { terminal_force } => terminal_force,
                    TransportEvent::StopEntangled { .. } => unreachable!(),
                };
                thresholds.push_history(terminal);
                // A heavy finish is not a successful single delivery, so the
                // fail threshold must not learn from it.
                update_thresholds(thresholds, AttemptContext::Other, config);
                swing = schedule_swing(&swing, thresholds.delta_theta, config.angle_max);
                if state.iteration >= config.loop_cap {
                    // Give up and drop what is held.
                    state.step(ControlEvent::CapExhausted);
                    let delivered = match world.deliver() {
                        Ok(d) => d,
                        Err(_) => return abort(state, thresholds, sink, world),
                    };
                    log_primitive(
                        sink,
                        &state,
                        thresholds,
                        Primitive::Deliver { count: delivered.len() },
                        "cap_exhausted".into(),
                    );
                    let (outcome, mode) = if delivered.len() == 1 {
                        (AttemptOutcome::SuccessSingle, None)
                    } else {
                        (AttemptOutcome::FailMultiple, Some(FailureMode::RecoveryFailure))
                    };
                    return finish_record(attempt_id, outcome, mode, state, thresholds, config, sink);
                }
                state.step(ControlEvent::DeliveredHeavy);
            }
            TransportDecision::ContinueStopped => {
                let context = if stop_lift {
                    AttemptContext::Other
                } else {
                    AttemptContext::NoStopLiftStopTransport
                };
                update_thresholds(thresholds, context, config);
                swing = schedule_swing(&swing, thresholds.delta_theta, config.angle_max);
                if state.iteration >= config.loop_cap {
                    state.step(ControlEvent::CapExhausted);
                    return abort(state, thresholds, sink, world);
                }
                state.step(ControlEvent::TransportStopped);
            }
        }
    }
}

/// The open-loop baseline: grasp the top candidate, lift and transport with
/// no monitoring, no spin, and deliver whatever hangs on.
fn run_open_loop<W: PickWorld>(
    world: &mut W,
    config: &ControllerConfig,
    thresholds: &mut ThresholdState,
    attempt_id: u64,
    sink: &mut dyn LogSink,
) -> AttemptRecord {
    let mut state = AttemptState {
        phase: ControllerPhase::Idle,
        counts: PrimitiveCounts::default(),
        traces: Vec::new(),
        n_transport: 0,
        iteration: 1,
    };
    let candidates = plan_grasp(world, config, Policy::LiftG);
    let grasped = candidates
        .first()
        .map(|top| world.try_grasp(top).unwrap_or(false))
        .unwrap_or(false);
    if let Some(top) = candidates.first() {
        sink.emit(&LogLine::Primitive {
            schema: LOG_SCHEMA,
            attempt_id,
            iteration: 1,
            primitive: Primitive::Grasp { u: top.u, v: top.v, rotation: top.rotation, score: top.score },
            event: if grasped { "bound".into() } else { "missed".into() },
            f_stop: thresholds.f_stop,
            f_fail: thresholds.f_fail,
        });
    }
    if !grasped {
        return finish_record(
            attempt_id,
            AttemptOutcome::FailNothing,
            Some(FailureMode::GraspFailure),
            state,
            thresholds,
            config,
            sink,
        );
    }
    let lift_trace = world.lift(thresholds);
    state.counts.lift += 1;
    if let Ok(t) = lift_trace {
        state.traces.push(t);
    }
    let transport_trace = world.transport(thresholds);
    state.counts.transport += 1;
    state.n_transport += 1;
    if let Ok(t) = transport_trace {
        state.traces.push(t);
    }
    let delivered = match world.deliver() {
        Ok(d) => d,
        Err(_) => {
            let _ = world.release();
            return finish_record(attempt_id, AttemptOutcome::Aborted, None, state, thresholds, config, sink);
        }
    };
    sink.emit(&LogLine::Primitive {
        schema: LOG_SCHEMA,
        attempt_id,
        iteration: 1,
        primitive: Primitive::Deliver { count: delivered.len() },
        event: "finished".into(),
        f_stop: thresholds.f_stop,
        f_fail: thresholds.f_fail,
    });
    let (outcome, mode) = if delivered.len() == 1 {
        (AttemptOutcome::SuccessSingle, None)
    } else {
        (AttemptOutcome::FailMultiple, Some(FailureMode::RecoveryFailure))
    };
    finish_record(attempt_id, outcome, mode, state, thresholds, config, sink)
}
