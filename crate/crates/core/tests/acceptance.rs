//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers. Run with
//! `cargo test --test acceptance -- --nocapture`.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use tanglepick_core::config::ControllerConfig;
use tanglepick_core::controller::{
    run_attempt, ControlEvent, ControllerPhase, End, LogLine, Policy, SpinCheckResult,
};
use tanglepick_core::grasp::{detect_grasps, DepthMap, GraspCandidate, GripperTemplate, Mask};
use tanglepick_core::runner::{run_task, TaskKind, TaskSpec};
use tanglepick_core::signal::{
    detect_lift_event, detect_transport_event, read_trace_jsonl, LiftEvent, TransportEvent,
};
use tanglepick_core::sim::{
    break_probability, eject_probability, init_world, slip_probability, spin_torques, BinState,
    HarnessBody, ObjectId, Point3, RegraspOutcome, ScriptStep, SimError, SwingOutcome, WorldConfig,
};
use tanglepick_core::types::{
    AttemptOutcome, FailureMode, ForceTrace, Phase, SwingParams, ThresholdState,
};

fn default_thresholds() -> ThresholdState {
    ControllerConfig::default().initial_thresholds()
}

// ---------------------------------------------------------------------
// Criterion 1: the shipped four-scenario trace corpus classifies as
// clean lift / end-grasp near-zero / lift stop / transport stop at the
// default filter and tolerance settings, in under a second.

#[test]
fn criterion_1_fig4_corpus_classification() {
    let start = Instant::now();
    let cfg = ControllerConfig::default();
    let thr = default_thresholds();
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/fig4");
    let read = |name: &str, phase: Phase| -> ForceTrace {
        let text = fs::read_to_string(dir.join(name)).expect("corpus file");
        read_trace_jsonl(phase, text.as_bytes()).expect("corpus parses")
    };

    let lift = |name: &str| {
        detect_lift_event(
            &read(name, Phase::Lift),
            &thr,
            cfg.filter_window,
            cfg.grad_eps,
            cfg.tail_fraction,
        )
        .unwrap()
    };
    let a = lift("fig4a_clean_lift.jsonl");
    assert!(matches!(a, LiftEvent::CleanLift { .. }), "fig4a: {a:?}");
    let b = lift("fig4b_end_grasp.jsonl");
    assert!(matches!(b, LiftEvent::GradientNearZero { .. }), "fig4b: {b:?}");
    let c = lift("fig4c_lift_spike.jsonl");
    assert!(matches!(c, LiftEvent::StopEntangled { .. }), "fig4c: {c:?}");
    let d = detect_transport_event(
        &read("fig4d_transport_spike.jsonl", Phase::Transport),
        &thr,
        cfg.filter_window,
    )
    .unwrap();
    assert!(matches!(d, TransportEvent::StopEntangled { .. }), "fig4d: {d:?}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "corpus classification took {elapsed:?}");
    println!(
        "ACCEPTANCE 1 PASS: corpus classified clean/near-zero/lift-stop/transport-stop in {:?}",
        elapsed
    );
}

// ---------------------------------------------------------------------
// Criterion 2: the controller state machine matches the documented
// transition table exhaustively, and scripted worlds drive every branch
// of the attempt loop, including the third-transport regrasp trigger and
// the mandatory pre-transport spin.

#[test]
fn criterion_2_fsm_conformance_and_branch_coverage() {
    use ControlEvent as E;
    use ControllerPhase as P;
    let phases = [
        P::Idle,
        P::Grasping,
        P::Lifting,
        P::Swinging,
        P::Regrasping,
        P::PreTransportSpin,
        P::Transporting,
        P::Done,
    ];
    let events = [
        E::Start,
        E::GraspOk,
        E::GraspFailed,
        E::LiftStop,
        E::RegraspNeeded,
        E::LiftClean,
        E::SwingOk,
        E::SwingSlipped,
        E::RegraspOk,
        E::RegraspFailed,
        E::SpinDone,
        E::SpinSlipped,
        E::TransportStopped,
        E::DeliveredLight,
        E::DeliveredHeavy,
        E::CapExhausted,
    ];
    // Independent copy of the documented table.
    let table = |p: P, e: E| -> Option<P> {
        Some(match (p, e) {
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
            _ => return None,
        })
    };
    let mut legal = 0;
    for &p in &phases {
        for &e in &events {
            match table(p, e) {
                Some(next) => {
                    assert_eq!(p.apply(e).unwrap(), next, "{p:?} on {e:?}");
                    legal += 1;
                }
                None => assert!(p.apply(e).is_err(), "{p:?} on {e:?} must be rejected"),
            }
        }
    }
    assert_eq!(legal, 16);

    // Scripted worlds: the real simulator with forced outcomes and pinned
    // grasp bindings drives every loop branch.
    let cfg = ControllerConfig { keep_traces: false, ..ControllerConfig::default() };
    let quiet = |n: usize, seed: u64| WorldConfig {
        n_objects: n,
        rng_seed: seed,
        noise_sigma: 0.0,
        entangle_base_p: 0.0,
        slip_gain: 0.0,
        eject_gain: 0.0,
        ..WorldConfig::default()
    };

    /// Delegating world that binds the grasp to a chosen body and arc
    /// parameter, so scripts control every downstream branch.
    struct PinnedGrasp {
        world: BinState,
        id: ObjectId,
        s: f64,
    }

    impl tanglepick_core::controller::PickWorld for PinnedGrasp {
        fn observe(&mut self) -> DepthMap {
            self.world.observe()
        }
        fn try_grasp(&mut self, _c: &GraspCandidate) -> Result<bool, SimError> {
            self.world.grasp_object(self.id, self.s)?;
            Ok(true)
        }
        fn lift(&mut self, t: &ThresholdState) -> Result<ForceTrace, SimError> {
            self.world.synth_lift_trace(t)
        }
        fn swing(&mut self, p: &SwingParams) -> Result<SwingOutcome, SimError> {
            self.world.apply_swing(p)
        }
        fn regrasp(&mut self) -> Result<RegraspOutcome, SimError> {
            self.world.apply_regrasp()
        }
        fn transport(&mut self, t: &ThresholdState) -> Result<ForceTrace, SimError> {
            self.world.synth_transport_trace(t)
        }
        fn deliver(&mut self) -> Result<Vec<ObjectId>, SimError> {
            self.world.deliver()
        }
        fn release(&mut self) -> Result<(), SimError> {
            self.world.release()
        }
        fn remaining(&self) -> usize {
            self.world.remaining()
        }
    }

    let run = |world: BinState, id: ObjectId, s: f64, thresholds: &mut ThresholdState| {
        let mut pinned = PinnedGrasp { world, id, s };
        let mut log: Vec<LogLine> = Vec::new();
        let record = run_attempt(&mut pinned, &cfg, thresholds, Policy::OursG, 0, &mut log);
        (record, log)
    };

    // Branch: clean lift straight to a successful delivery, with the
    // mandatory spin before the transport.
    let world = init_world(&quiet(1, 1)).unwrap();
    let (record, log) = run(world, 0, 0.5, &mut default_thresholds());
    assert_eq!(record.outcome, AttemptOutcome::SuccessSingle);
    assert_spin_before_every_transport(&log);

    // Branch: entangled lift -> stop -> swing -> delivery.
    let mut world = init_world(&quiet(2, 2)).unwrap();
    world.link(0, 1, 1).unwrap();
    world.push_script([
        ScriptStep::LiftSpike { exceed: true },
        ScriptStep::Swing { break_all: true, slip: false },
    ]);
    let (record, log) = run(world, 0, 0.5, &mut default_thresholds());
    assert_eq!(record.outcome, AttemptOutcome::SuccessSingle);
    assert!(record.counts.swing >= 1);
    assert_spin_before_every_transport(&log);

    // Branch: end grasp -> near-zero gradient -> regrasp -> delivery.
    let mut world = init_world(&quiet(1, 3)).unwrap();
    world.push_script([ScriptStep::Regrasp { hang_angle: 0.0, pull_free: false }]);
    let (record, _) = run(world, 0, 0.03, &mut default_thresholds());
    assert_eq!(record.outcome, AttemptOutcome::SuccessSingle);
    assert_eq!(record.counts.regrasp, 1);

    // Branch: regrasp handoff failure drops the object back.
    let mut world = init_world(&quiet(1, 4)).unwrap();
    world.push_script([ScriptStep::Regrasp { hang_angle: 1.0, pull_free: false }]);
    let (record, _) = run(world, 0, 0.03, &mut default_thresholds());
    assert_eq!(record.outcome, AttemptOutcome::FailNothing);
    assert_eq!(record.failure_mode, Some(FailureMode::RegraspFailure));

    // Branch: swing slip loses the object.
    let mut world = init_world(&quiet(2, 5)).unwrap();
    world.link(0, 1, 1).unwrap();
    world.push_script([
        ScriptStep::LiftSpike { exceed: true },
        ScriptStep::Swing { break_all: false, slip: true },
    ]);
    let (record, _) = run(world, 0, 0.5, &mut default_thresholds());
    assert_eq!(record.outcome, AttemptOutcome::FailNothing);
    assert_eq!(record.failure_mode, Some(FailureMode::SwingFailure));

    // The remaining multi-iteration branches must keep their entanglement
    // through the mandatory spins, so swings are made inert.
    let inert_swing = |n: usize, seed: u64| WorldConfig {
        swing_break_gain: 0.0,
        ..quiet(n, seed)
    };

    // Branch: three stopped transports push n_transport over two; the
    // fourth loop iteration regrasps even though the lift reads clean.
    // Script steps are ordered exactly like the draw sites they override:
    // lift spike, then (from iteration four) the regrasp, then the
    // transport spike.
    let mut world = init_world(&inert_swing(2, 6)).unwrap();
    world.link(0, 1, 1).unwrap();
    let mut script = Vec::new();
    for iteration in 0..4 {
        script.push(ScriptStep::LiftSpike { exceed: false });
        if iteration >= 3 {
            script.push(ScriptStep::Regrasp { hang_angle: 0.0, pull_free: true });
            // the pull frees the body: the final transport draws no spike
        } else {
            script.push(ScriptStep::TransportSpike { exceed: true });
        }
    }
    world.push_script(script);
    let (record, _) = run(world, 0, 0.5, &mut default_thresholds());
    assert_eq!(record.outcome, AttemptOutcome::SuccessSingle);
    assert!(record.n_transport > 2, "n_transport {}", record.n_transport);
    assert_eq!(record.counts.regrasp, 1, "regrasp fired by the transport counter");

    // Branch: heavy delivery holds on, loops, and the loop cap eventually
    // gives up with whatever hangs on.
    let mut world = init_world(&inert_swing(2, 7)).unwrap();
    world.link(0, 1, 1).unwrap();
    let mut script = Vec::new();
    for iteration in 0..cfg.loop_cap {
        script.push(ScriptStep::LiftSpike { exceed: false });
        if iteration >= 3 {
            script.push(ScriptStep::Regrasp { hang_angle: 0.0, pull_free: false });
        }
        script.push(ScriptStep::TransportSpike { exceed: false });
    }
    world.push_script(script);
    let mut thr = default_thresholds();
    let (record, _) = run(world, 0, 0.5, &mut thr);
    assert_eq!(record.outcome, AttemptOutcome::FailMultiple);
    assert_eq!(record.failure_mode, Some(FailureMode::RecoveryFailure));
    assert!(!thr.history.is_empty(), "heavy deliveries append to the history");

    // Branch: endless transport snags exhaust the loop cap into an abort.
    let mut world = init_world(&inert_swing(2, 8)).unwrap();
    world.link(0, 1, 3).unwrap();
    let mut script = Vec::new();
    for iteration in 0..cfg.loop_cap {
        script.push(ScriptStep::LiftSpike { exceed: false });
        if iteration >= 3 {
            script.push(ScriptStep::Regrasp { hang_angle: 0.0, pull_free: false });
        }
        script.push(ScriptStep::TransportSpike { exceed: true });
    }
    world.push_script(script);
    let (record, _) = run(world, 0, 0.5, &mut default_thresholds());
    assert_eq!(record.outcome, AttemptOutcome::Aborted);
    assert_eq!(record.counts.transport, cfg.loop_cap);

    // Branch: an empty bin yields no candidates and a grasp failure.
    let mut world = init_world(&quiet(0, 9)).unwrap();
    let mut log: Vec<LogLine> = Vec::new();
    let record = run_attempt(
        &mut world,
        &cfg,
        &mut default_thresholds(),
        Policy::OursG,
        0,
        &mut log,
    );
    assert_eq!(record.outcome, AttemptOutcome::FailNothing);
    assert_eq!(record.failure_mode, Some(FailureMode::GraspFailure));

    println!("ACCEPTANCE 2 PASS: 16 legal transitions, 112 rejected, all loop branches driven");
}

/// Every transport log line must be directly preceded by a spin line in
/// the primitive stream.
fn assert_spin_before_every_transport(log: &[LogLine]) {
    let primitives: Vec<&str> = log
        .iter()
        .filter_map(|l| match l {
            LogLine::Primitive { primitive, .. } => Some(match primitive {
                tanglepick_core::controller::Primitive::Grasp { .. } => "grasp",
                tanglepick_core::controller::Primitive::Lift => "lift",
                tanglepick_core::controller::Primitive::Swing { .. } => "swing",
                tanglepick_core::controller::Primitive::Spin { .. } => "spin",
                tanglepick_core::controller::Primitive::Regrasp { .. } => "regrasp",
                tanglepick_core::controller::Primitive::Transport => "transport",
                tanglepick_core::controller::Primitive::Deliver { .. } => "deliver",
            }),
            _ => None,
        })
        .collect();
    for (i, &p) in primitives.iter().enumerate() {
        if p == "transport" {
            assert!(i > 0 && primitives[i - 1] == "spin", "transport without a preceding spin");
        }
    }
}

// ---------------------------------------------------------------------
// Criterion 3: online tuning converges like the reported procedure: in a
// 100-attempt run over 0.8 N objects with 0.05 N noise, the fail
// threshold freezes within 30 successful deliveries inside [0.8, 1.1] N,
// and the stop threshold is non-increasing and floored, in under 10 s.

#[test]
fn criterion_3_threshold_convergence() {
    let start = Instant::now();
    let cfg = ControllerConfig { keep_traces: false, ..ControllerConfig::default() };
    let spec = TaskSpec {
        task: TaskKind::Standard,
        policy: Policy::OursG,
        world: WorldConfig {
            n_objects: 8,
            rng_seed: 1,
            noise_sigma: 0.05,
            ..WorldConfig::default()
        },
        episodes: 1,
        max_attempts: 100,
    };
    let (_, records) = run_task(&spec, &cfg, &mut tanglepick_core::controller::NullSink).unwrap();
    assert_eq!(records.len(), 100);

    let mut successes_before = 0usize;
    let mut converged_at = None;
    for r in &records {
        if r.outcome == AttemptOutcome::SuccessSingle {
            successes_before += 1;
        }
        if r.thresholds_after.f_fail_converged {
            converged_at = Some((successes_before, r.thresholds_after.f_fail));
            break;
        }
    }
    let (successes, f_fail) = converged_at.expect("fail threshold must converge");
    assert!(successes <= 30, "converged only after {successes} successful deliveries");
    assert!((0.8..=1.1).contains(&f_fail), "converged f_fail {f_fail}");

    // The stop threshold never rises and never crosses the floor.
    let mut prev = f64::INFINITY;
    for r in &records {
        let t = &r.thresholds_after;
        assert!(t.f_stop <= prev + 1e-12, "f_stop rose");
        assert!(t.f_stop >= t.f_fail + t.delta_f - 1e-9, "f_stop fell through the floor");
        prev = t.f_stop;
    }
    // Once converged, the fail threshold stays frozen.
    let frozen: Vec<f64> = records
        .iter()
        .filter(|r| r.thresholds_after.f_fail_converged)
        .map(|r| r.thresholds_after.f_fail)
        .collect();
    assert!(frozen.windows(2).all(|w| w[0] == w[1]));

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "tuning run took {elapsed:?}");
    println!(
        "ACCEPTANCE 3 PASS: f_fail converged to {f_fail:.3} N after {successes} successes in {:?}",
        elapsed
    );
}

// ---------------------------------------------------------------------
// Criterion 4: on 50 random synthetic depth maps, every returned grasp
// has zero collision response under a per-pixel oracle and the top
// candidate matches the oracle's exhaustive argmax under the documented
// total order. Exact.

#[test]
fn criterion_4_grasp_oracle_equivalence() {
    const RES: f64 = 0.005;
    let template = GripperTemplate::parallel_jaw(0.02, 0.005, 0.025, RES).unwrap();
    let (n_rotations, n_heights, top_k) = (6, 3, 12);

    let rotated = |mask: &Mask, angle: f64| -> Mask {
        // Reuses the library rotation via the public template API is not
        // possible on raw masks, so the oracle re-derives rotations with
        // its own inverse nearest-neighbor mapping.
        let side = template.canvas_side();
        let (sin, cos) = angle.sin_cos();
        let half = (side / 2) as i32;
        let cx = (mask.width / 2) as i32;
        let cy = (mask.height / 2) as i32;
        let mut bits = vec![false; side * side];
        for y in 0..side {
            for x in 0..side {
                let dx = x as i32 - half;
                let dy = y as i32 - half;
                let sx = (cos * dx as f64 + sin * dy as f64).round() as i32 + cx;
                let sy = (-sin * dx as f64 + cos * dy as f64).round() as i32 + cy;
                if sx >= 0
                    && sy >= 0
                    && (sx as usize) < mask.width
                    && (sy as usize) < mask.height
                    && mask.get(sx as usize, sy as usize)
                {
                    bits[y * side + x] = true;
                }
            }
        }
        Mask::new(side, side, bits).unwrap()
    };

    let mut checked_candidates = 0usize;
    for seed in 0..50u64 {
        // Random stroke map from a tiny xorshift stream.
        let mut map = DepthMap::zeros(64, 64, RES);
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(0xDEADBEEF);
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..(2 + (seed % 3) as usize) {
            let (x0, y0) = (6.0 + 52.0 * next(), 6.0 + 52.0 * next());
            let (x1, y1) = (6.0 + 52.0 * next(), 6.0 + 52.0 * next());
            let h = 0.008 + 0.012 * next();
            let radius = 1.2 + 0.6 * next();
            for v in 0..64usize {
                for u in 0..64usize {
                    let (px, py) = (u as f64, v as f64);
                    let (dx, dy) = (x1 - x0, y1 - y0);
                    let len2 = dx * dx + dy * dy;
                    let t = if len2 == 0.0 {
                        0.0
                    } else {
                        ((px - x0) * dx + (py - y0) * dy) / len2
                    }
                    .clamp(0.0, 1.0);
                    let (cx, cy) = (x0 + t * dx, y0 + t * dy);
                    let d2 = (px - cx).powi(2) + (py - cy).powi(2);
                    if d2 <= radius * radius && map.get(u, v) < h {
                        map.set(u, v, h);
                    }
                }
            }
        }

        let candidates = detect_grasps(&map, &template, n_rotations, n_heights, top_k).unwrap();

        // Oracle: direct recomputation of the masked smoothed score over
        // every pixel, rotation and slice, all in exact integer arithmetic.
        let side = template.canvas_side();
        let half = (side / 2) as i32;
        let (h_min, h_max) = map
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| (lo.min(h), hi.max(h)));
        let span = h_max - h_min;
        let kernel = [1u64, 4, 6, 4, 1];
        // (score, height, u, v, rotation index) of every eligible center.
        let mut oracle_scores: Vec<(f64, f64, usize, usize, usize)> = Vec::new();
        if span > f64::EPSILON {
            for rot in 0..n_rotations {
                let angle = rot as f64 * std::f64::consts::PI / n_rotations as f64;
                let contact = rotated(&template.contact, angle);
                let collision = rotated(&template.collision, angle);
                let contact_count = (0..side * side).filter(|&i| contact.bits[i]).count();
                for slice_idx in 1..=n_heights {
                    let z = h_min + span * slice_idx as f64 / (n_heights + 1) as f64;
                    let occ = |u: i32, v: i32| map.get(u as usize, v as usize) > z;
                    let mut raw = vec![0u64; 64 * 64];
                    let mut eligible = vec![false; 64 * 64];
                    for v in half..64 - half {
                        for u in half..64 - half {
                            let mut collides = false;
                            let mut hits = 0u64;
                            for y in 0..side {
                                for x in 0..side {
                                    let (pu, pv) = (u + x as i32 - half, v + y as i32 - half);
                                    if collision.get(x, y) && occ(pu, pv) {
                                        collides = true;
                                    }
                                    if contact.get(x, y) && occ(pu, pv) {
                                        hits += 1;
                                    }
                                }
                            }
                            if !collides && hits > 0 {
                                raw[v as usize * 64 + u as usize] = hits;
                                eligible[v as usize * 64 + u as usize] = true;
                            }
                        }
                    }
                    // Direct 2D binomial smoothing in integers.
                    for v in half..64 - half {
                        for u in half..64 - half {
                            let idx = v as usize * 64 + u as usize;
                            if !eligible[idx] {
                                continue;
                            }
                            let mut acc = 0u64;
                            for (ky, &wy) in kernel.iter().enumerate() {
                                for (kx, &wx) in kernel.iter().enumerate() {
                                    let (pu, pv) = (u as usize + kx - 2, v as usize + ky - 2);
                                    acc += wy * wx * raw[pv * 64 + pu];
                                }
                            }
                            let score = acc as f64 / (256.0 * contact_count as f64);
                            oracle_scores.push((score, z, u as usize, v as usize, rot));
                        }
                    }
                }
            }
        }
        // The documented total order: score desc, height desc, u asc,
        // v asc, rotation asc.
        oracle_scores.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(b.1.total_cmp(&a.1))
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
                .then(a.4.cmp(&b.4))
        });
        let oracle_best = oracle_scores.first().copied();

        // Zero collision response for every returned candidate.
        for c in &candidates {
            let collision = rotated(&template.collision, c.rotation);
            let mut hits = 0;
            for y in 0..side {
                for x in 0..side {
                    if !collision.get(x, y) {
                        continue;
                    }
                    let (pu, pv) = (
                        c.u as i32 + x as i32 - half,
                        c.v as i32 + y as i32 - half,
                    );
                    if map.get(pu as usize, pv as usize) > c.grasp_height {
                        hits += 1;
                    }
                }
            }
            assert_eq!(hits, 0, "seed {seed}: candidate {c:?} collides");
            checked_candidates += 1;
        }

        // Top-1 equals the oracle argmax, exactly.
        match (candidates.first(), oracle_best) {
            (None, None) => {}
            (Some(top), Some((score, height, u, v, rot))) => {
                assert_eq!(top.score, score, "seed {seed}: top score mismatch");
                assert_eq!(
                    (top.u, top.v, top.rotation_index, top.grasp_height),
                    (u, v, rot, height),
                    "seed {seed}: top candidate mismatch"
                );
            }
            (got, want) => panic!("seed {seed}: candidates {got:?} vs oracle {want:?}"),
        }
    }
    println!(
        "ACCEPTANCE 4 PASS: {checked_candidates} candidates collision-free, 50 argmax matches exact"
    );
}

// ---------------------------------------------------------------------
// Criterion 5: swing break/slip/eject frequencies over 10,000 draws match
// the closed-form probabilities within two percentage points, and the
// object-conservation invariant holds through 1,000 random episodes.

#[test]
fn criterion_5_simulator_statistical_fidelity() {
    // Interior-probability operating point.
    let params = SwingParams { theta3: 0.4, theta4: 0.4, theta5: 0.4, omega: 1.0, n: 1 };
    let config = WorldConfig {
        n_objects: 2,
        noise_sigma: 0.0,
        entangle_base_p: 0.0,
        swing_break_gain: 0.25,
        slip_gain: 0.15,
        eject_gain: 0.6,
        ..WorldConfig::default()
    };
    let p_break = break_probability(config.swing_break_gain, &params, 2);
    let p_slip = slip_probability(config.slip_gain, &params);
    let p_eject = eject_probability(config.eject_gain, p_break, 1);
    assert!((0.05..0.95).contains(&p_break));
    assert!((0.05..0.95).contains(&p_slip));
    assert!((0.01..0.95).contains(&p_eject));

    let trials = 10_000usize;
    let (mut breaks, mut slips, mut ejects) = (0usize, 0usize, 0usize);
    for seed in 0..trials {
        let mut world = init_world(&WorldConfig { rng_seed: seed as u64, ..config.clone() }).unwrap();
        world.link(0, 1, 2).unwrap();
        world.grasp_object(0, 0.5).unwrap();
        let out = world.apply_swing(&params).unwrap();
        breaks += out.edges_broken;
        slips += usize::from(out.slipped);
        ejects += out.ejected.len();
    }
    let f_break = breaks as f64 / trials as f64;
    let f_slip = slips as f64 / trials as f64;
    let f_eject = ejects as f64 / trials as f64;
    assert!((f_break - p_break).abs() < 0.02, "break {f_break} vs {p_break}");
    assert!((f_slip - p_slip).abs() < 0.02, "slip {f_slip} vs {p_slip}");
    assert!((f_eject - p_eject).abs() < 0.02, "eject {f_eject} vs {p_eject}");

    // Conservation across 1,000 random episodes.
    let cfg = ControllerConfig { keep_traces: false, ..ControllerConfig::default() };
    for seed in 0..1000u64 {
        let world_cfg = WorldConfig {
            n_objects: 1 + (seed % 4) as usize,
            rng_seed: seed,
            render_resolution: 0.0075,
            ..WorldConfig::default()
        };
        let mut world = init_world(&world_cfg).unwrap();
        let mut thresholds = cfg.initial_thresholds();
        let policy = match seed % 3 {
            0 => Policy::LiftG,
            1 => Policy::OursG,
            _ => Policy::OursA,
        };
        for attempt in 0..world_cfg.n_objects * 3 {
            if world.remaining() == 0 {
                break;
            }
            let _ = run_attempt(
                &mut world,
                &cfg,
                &mut thresholds,
                policy,
                attempt as u64,
                &mut tanglepick_core::controller::NullSink,
            );
            assert!(
                world.conservation_ok(),
                "conservation violated at seed {seed} attempt {attempt}"
            );
        }
    }
    println!(
        "ACCEPTANCE 5 PASS: break {f_break:.3}/{p_break:.3} slip {f_slip:.3}/{p_slip:.3} \
         eject {f_eject:.3}/{p_eject:.3}; conservation held over 1000 episodes"
    );
}

// ---------------------------------------------------------------------
// Criterion 6: at the calibrated gain settings, 200 standard-task
// episodes with 40 medium harnesses order the policies like the reported
// comparison: ours-A >= ours-G >= lift-G + 0.2, in under two minutes.

#[test]
fn criterion_6_directional_policy_ordering() {
    let start = Instant::now();
    let cfg = ControllerConfig { keep_traces: false, ..ControllerConfig::default() };
    let rate = |policy: Policy| -> f64 {
        let spec = TaskSpec {
            task: TaskKind::Standard,
            policy,
            world: WorldConfig { n_objects: 40, rng_seed: 7, ..WorldConfig::default() },
            episodes: 200,
            max_attempts: 5,
        };
        let (summary, _) = run_task(&spec, &cfg, &mut tanglepick_core::controller::NullSink).unwrap();
        summary.success_rate
    };
    let lift_g = rate(Policy::LiftG);
    let ours_g = rate(Policy::OursG);
    let ours_a = rate(Policy::OursA);
    assert!(
        ours_a >= ours_g,
        "ours_a {ours_a:.3} must be at least ours_g {ours_g:.3}"
    );
    assert!(
        ours_g >= lift_g + 0.2,
        "ours_g {ours_g:.3} must clear lift_g {lift_g:.3} by 0.2"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "directional run took {elapsed:?}");
    println!(
        "ACCEPTANCE 6 PASS: ours_a {ours_a:.3} >= ours_g {ours_g:.3} >= lift_g {lift_g:.3} + 0.2 in {:?}",
        elapsed
    );
}

// ---------------------------------------------------------------------
// Criterion 7 (library side): rerunning any task with an identical spec
// produces byte-identical JSONL. The CLI binary is exercised in the CLI
// crate's acceptance test.

#[test]
fn criterion_7_library_log_determinism() {
    let cfg = ControllerConfig::default();
    let spec = TaskSpec {
        task: TaskKind::Emptying,
        policy: Policy::OursA,
        world: WorldConfig { n_objects: 5, rng_seed: 42, ..WorldConfig::default() },
        episodes: 3,
        max_attempts: 12,
    };
    let mut log_a: Vec<LogLine> = Vec::new();
    let mut log_b: Vec<LogLine> = Vec::new();
    run_task(&spec, &cfg, &mut log_a).unwrap();
    run_task(&spec, &cfg, &mut log_b).unwrap();
    let text_a = tanglepick_core::runner::log_to_jsonl(&log_a);
    let text_b = tanglepick_core::runner::log_to_jsonl(&log_b);
    assert_eq!(text_a, text_b);
    assert!(!text_a.is_empty());
    println!(
        "ACCEPTANCE 7 PASS (library): {} identical JSONL bytes across reruns",
        text_a.len()
    );
}

// ---------------------------------------------------------------------
// Criterion 8: over 1,000 randomized center-of-mass configurations the
// spin check always selects the analytically minimal-torque end, with
// exact ties going to A.

#[test]
fn criterion_8_regrasp_end_selection() {
    let mut state = 0x1234_5678_9ABC_DEFu64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for trial in 0..1000 {
        let length = 0.5 + next();
        let cable = 0.3 + 0.8 * next();
        let c0 = 0.3 * next();
        let c1 = 0.3 * next();
        let s = next();
        let body = HarnessBody {
            id: 0,
            polyline: vec![
                Point3 { x: 0.0, y: 0.0, z: 0.008 },
                Point3 { x: length, y: 0.0, z: 0.008 },
            ],
            length,
            weight: cable + c0 + c1,
            connector_masses: [c0, c1],
            grasp_point: Some(s),
        };
        let drape = 0.5;
        let (ta, tb) = spin_torques(&body, s, drape);
        let chosen = SpinCheckResult::from_torques(ta, tb).chosen_end;

        // Independent moment arithmetic: presenting one end down leaves the
        // other side raised, so each pose carries the opposite side's
        // moment about the grasp.
        let side_a_moment = cable * s * (length * s / 2.0) + c0 * length * s;
        let side_b_moment = cable * (1.0 - s) * (length * (1.0 - s) / 2.0) + c1 * length * (1.0 - s);
        let oracle_ta = drape * side_b_moment;
        let oracle_tb = drape * side_a_moment;
        let oracle = if oracle_ta.abs() <= oracle_tb.abs() { End::A } else { End::B };
        assert_eq!(chosen, oracle, "trial {trial}: torques {ta} {tb}");
    }
    // Exact tie resolves to A.
    let symmetric = HarnessBody {
        id: 0,
        polyline: vec![
            Point3 { x: 0.0, y: 0.0, z: 0.008 },
            Point3 { x: 0.74, y: 0.0, z: 0.008 },
        ],
        length: 0.74,
        weight: 0.8,
        connector_masses: [0.08, 0.08],
        grasp_point: Some(0.5),
    };
    let (ta, tb) = spin_torques(&symmetric, 0.5, 0.5);
    assert_eq!(ta, tb);
    assert_eq!(SpinCheckResult::from_torques(ta, tb).chosen_end, End::A);
    println!("ACCEPTANCE 8 PASS: 1000 randomized end selections match the torque oracle, tie -> A");
}
