//! Closed-loop bin picking of entangled wire harnesses.
//!
//! The crate is organized around a picking-attempt state machine that grasps
//! a harness from a cluttered bin, monitors the vertical force during lift
//! and transport, and recovers from entanglement with two motion primitives:
//! a high-speed swing and a dual-arm regrasp. Force thresholds are tuned
//! online from the history of delivered weights.
//!
//! - [`types`]: shared domain types (force traces, swing parameters,
//!   threshold state, attempt records).
//! - [`config`]: flat key=value controller configuration with validation.
//! - [`signal`]: median filtering, gradient estimation, and lift/transport
//!   event detection.
//! - [`grasp`]: collision-aware grasp detection on a single depth map, plus
//!   a middle-of-object re-ranking heuristic.
//! - [`sim`]: a deterministic, seeded world model (harness bodies, an
//!   entanglement multigraph, force/torque synthesis).
//! - [`controller`]: the closed-loop attempt loop, swing scheduling, the
//!   regrasp end-selection, and the online parameter tuner.
//! - [`runner`]: experiment tasks over seeded episodes with JSONL/CSV output.

pub mod config;
pub mod controller;
pub mod grasp;
pub mod runner;
pub mod signal;
pub mod sim;
pub mod types;

pub use config::{validate_config, ConfigError, ControllerConfig};
pub use controller::{
    run_attempt, schedule_swing, update_thresholds, AttemptContext, ControlEvent, ControllerPhase,
    LogLine, LogSink, PickWorld, Policy, SpinCheckResult,
};
pub use grasp::{detect_grasps, rank_with_mid_bias, DepthMap, GraspCandidate, GripperTemplate};
pub use runner::{run_task, summarize, RunSummary, TaskKind, TaskSpec};
pub use signal::{
    detect_lift_event, detect_transport_event, gradient, median_filter, LiftEvent, TransportEvent,
};
pub use sim::{init_world, BinState, EntanglementGraph, HarnessBody, ObjectProfile, WorldConfig};
pub use types::{
    AttemptOutcome, AttemptRecord, FailureMode, ForceSample, ForceTrace, Phase, PrimitiveCounts,
    SwingParams, ThresholdState,
};
