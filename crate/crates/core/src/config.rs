//! Controller configuration: defaults, key=value parsing, validation.
//!
//! The on-disk format is flat UTF-8 `key=value` lines with `#` comments.
//! Angle- and velocity-valued keys accept either decimal radians or the
//! literal forms `pi`, `pi/N`, `π/N`. When the same key appears more than
//! once (e.g. a CLI override appended after a file), the last value wins.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{SwingParams, ThresholdState};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("malformed line {0}: expected key=value")]
    MalformedLine(usize),
    #[error("{0}")]
    Constraint(String),
}

/// Fully-resolved controller parameters. Defaults mirror the initial
/// operating point of the picking policy; everything is overridable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    // Initial swing primitive.
    pub theta3: f64,
    pub theta4: f64,
    pub theta5: f64,
    pub omega: f64,
    pub n: u32,
    // Force thresholds and tuning residuals.
    pub f_stop: f64,
    pub f_fail: f64,
    pub delta_f: f64,
    pub delta_theta: f64,
    // Joint and velocity limits used when scheduling swings.
    pub angle_max: f64,
    pub omega_max: f64,
    // Signal processing.
    pub filter_window: usize,
    pub grad_eps: f64,
    pub tail_fraction: f64,
    // Tuner plateau detection.
    pub plateau_window: usize,
    pub plateau_eps: f64,
    pub fail_margin: f64,
    // Attempt loop.
    pub loop_cap: u32,
    // Mandatory pre-transport spin Swing((0, 0, spin_theta5), spin_omega, 2).
    pub spin_theta5: f64,
    pub spin_omega: f64,
    // Bookkeeping.
    pub sample_period_ms: u32,
    pub keep_traces: bool,
    // Grasp detection.
    pub n_rotations: usize,
    pub n_heights: usize,
    pub top_k: usize,
    pub mid_bias_alpha: f64,
    pub gripper_open_width: f64,
    pub gripper_finger_width: f64,
    pub gripper_jaw_len: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            theta3: PI / 4.0,
            theta4: PI / 3.0,
            theta5: PI / 3.0,
            omega: PI / 2.0,
            n: 2,
            f_stop: 3.0,
            f_fail: 1.0,
            delta_f: 0.1,
            delta_theta: PI / 18.0,
            angle_max: PI,
            omega_max: PI,
            filter_window: 5,
            grad_eps: 0.02,
            tail_fraction: 0.25,
            plateau_window: 3,
            plateau_eps: 0.05,
            fail_margin: 0.15,
            loop_cap: 8,
            spin_theta5: PI / 3.0,
            spin_omega: PI / 2.0,
            sample_period_ms: 10,
            keep_traces: true,
            n_rotations: 8,
            n_heights: 6,
            top_k: 24,
            mid_bias_alpha: 0.6,
            gripper_open_width: 0.06,
            gripper_finger_width: 0.012,
            gripper_jaw_len: 0.025,
        }
    }
}

impl ControllerConfig {
    /// The swing parameters an attempt starts from.
    pub fn initial_swing(&self) -> SwingParams {
        SwingParams {
            theta3: self.theta3,
            theta4: self.theta4,
            theta5: self.theta5,
            omega: self.omega,
            n: self.n,
        }
    }

    /// The pre-transport two-way spin.
    pub fn spin_params(&self) -> SwingParams {
        SwingParams {
            theta3: 0.0,
            theta4: 0.0,
            theta5: self.spin_theta5,
            omega: self.spin_omega,
            n: 2,
        }
    }

    /// Fresh tuner state seeded from the configured thresholds.
    pub fn initial_thresholds(&self) -> ThresholdState {
        ThresholdState::new(self.f_stop, self.f_fail, self.delta_f, self.delta_theta)
            .expect("validated config yields valid thresholds")
    }

    fn check(&self) -> Result<(), ConfigError> {
        let err = |msg: String| Err(ConfigError::Constraint(msg));
        if !(self.f_stop > 0.0 && self.f_fail > 0.0) {
            return err("force thresholds must be positive".into());
        }
        if self.f_fail >= self.f_stop {
            return err("f_fail must be < f_stop".into());
        }
        if !(self.delta_f > 0.0 && self.delta_theta > 0.0) {
            return err("delta_f and delta_theta must be positive".into());
        }
        if !(self.angle_max > 0.0 && self.omega_max > 0.0) {
            return err("angle_max and omega_max must be positive".into());
        }
        self.initial_swing()
            .validate(self.angle_max, self.omega_max)
            .map_err(|e| ConfigError::Constraint(e.to_string()))?;
        if !(0.0..=self.angle_max).contains(&self.spin_theta5) {
            return err("spin_theta5 exceeds angle_max".into());
        }
        if !(self.spin_omega > 0.0 && self.spin_omega <= self.omega_max) {
            return err("spin_omega exceeds omega_max".into());
        }
        if self.filter_window == 0 || self.filter_window % 2 == 0 {
            return err("filter_window must be odd and >= 1".into());
        }
        if !(self.grad_eps > 0.0) {
            return err("grad_eps must be positive".into());
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return err("tail_fraction must lie in (0, 1]".into());
        }
        if self.plateau_window < 2 {
            return err("plateau_window must be >= 2".into());
        }
        if !(self.plateau_eps > 0.0) {
            return err("plateau_eps must be positive".into());
        }
        if self.fail_margin < 0.0 {
            return err("fail_margin must be non-negative".into());
        }
        if self.loop_cap < 1 {
            return err("loop_cap must be >= 1".into());
        }
        if self.n_rotations < 1 || self.n_heights < 1 || self.top_k < 1 {
            return err("n_rotations, n_heights and top_k must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.mid_bias_alpha) {
            return err("mid_bias_alpha must lie in [0, 1]".into());
        }
        if !(self.gripper_open_width > 0.0
            && self.gripper_finger_width > 0.0
            && self.gripper_jaw_len > 0.0)
        {
            return err("gripper dimensions must be positive".into());
        }
        Ok(())
    }

    /// Serializes to the flat key=value form; `validate_config` re-parses it
    /// to an equal config.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("theta3", format!("{}", self.theta3));
        kv("theta4", format!("{}", self.theta4));
        kv("theta5", format!("{}", self.theta5));
        kv("omega", format!("{}", self.omega));
        kv("n", format!("{}", self.n));
        kv("f_stop", format!("{}", self.f_stop));
        kv("f_fail", format!("{}", self.f_fail));
        kv("delta_f", format!("{}", self.delta_f));
        kv("delta_theta", format!("{}", self.delta_theta));
        kv("angle_max", format!("{}", self.angle_max));
        kv("omega_max", format!("{}", self.omega_max));
        kv("filter_window", format!("{}", self.filter_window));
        kv("grad_eps", format!("{}", self.grad_eps));
        kv("tail_fraction", format!("{}", self.tail_fraction));
        kv("plateau_window", format!("{}", self.plateau_window));
        kv("plateau_eps", format!("{}", self.plateau_eps));
        kv("fail_margin", format!("{}", self.fail_margin));
        kv("loop_cap", format!("{}", self.loop_cap));
        kv("spin_theta5", format!("{}", self.spin_theta5));
        kv("spin_omega", format!("{}", self.spin_omega));
        kv("sample_period_ms", format!("{}", self.sample_period_ms));
        kv("keep_traces", format!("{}", self.keep_traces));
        kv("n_rotations", format!("{}", self.n_rotations));
        kv("n_heights", format!("{}", self.n_heights));
        kv("top_k", format!("{}", self.top_k));
        kv("mid_bias_alpha", format!("{}", self.mid_bias_alpha));
        kv("gripper_open_width", format!("{}", self.gripper_open_width));
        kv("gripper_finger_width", format!("{}", self.gripper_finger_width));
        kv("gripper_jaw_len", format!("{}", self.gripper_jaw_len));
        out
    }
}

/// Parses an angle or angular velocity: decimal radians or `pi[/N]`.
pub fn parse_angle(key: &str, raw: &str) -> Result<f64, ConfigError> {
    let s = raw.trim();
    let invalid = |reason: &str| ConfigError::InvalidValue {
        key: key.to_string(),
        reason: reason.to_string(),
    };
    let lowered = s.to_lowercase();
    let pi_form = lowered.strip_prefix("pi").or_else(|| lowered.strip_prefix("π"));
    if let Some(rest) = pi_form {
        let rest = rest.trim();
        if rest.is_empty() {
            return Ok(PI);
        }
        let denom = rest
            .strip_prefix('/')
            .ok_or_else(|| invalid("expected pi or pi/N"))?
            .trim();
        let d: f64 = denom.parse().map_err(|_| invalid("bad divisor in pi/N"))?;
        if !(d > 0.0) {
            return Err(invalid("divisor must be positive"));
        }
        return Ok(PI / d);
    }
    let v: f64 = s.parse().map_err(|_| invalid("not a number"))?;
    if !v.is_finite() {
        return Err(invalid("must be finite"));
    }
    Ok(v)
}

/// Splits file content into ordered key/value pairs, dropping comments and
/// blank lines.
pub fn parse_key_values(content: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (lineno, raw) in content.lines().enumerate() {
        let line = match raw.find('#') {
            Some(idx) => &raw[..idx],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::MalformedLine(lineno + 1))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Resolves an ordered key/value map into a full configuration. Unset keys
/// take defaults; unknown keys, malformed values, and constraint violations
/// (non-positive thresholds, `f_fail >= f_stop`, angles above limits) are
/// rejected.
pub fn validate_config(pairs: &[(String, String)]) -> Result<ControllerConfig, ConfigError> {
    let mut cfg = ControllerConfig::default();
    for (key, value) in pairs {
        let invalid = |reason: String| ConfigError::InvalidValue {
            key: key.clone(),
            reason,
        };
        let parse_f64 = |v: &str| -> Result<f64, ConfigError> {
            v.parse::<f64>()
                .map_err(|_| invalid("not a number".into()))
                .and_then(|x| {
                    if x.is_finite() {
                        Ok(x)
                    } else {
                        Err(invalid("must be finite".into()))
                    }
                })
        };
        let parse_usize =
            |v: &str| -> Result<usize, ConfigError> { v.parse().map_err(|_| invalid("not an integer".into())) };
        let parse_u32 =
            |v: &str| -> Result<u32, ConfigError> { v.parse().map_err(|_| invalid("not an integer".into())) };
        match key.as_str() {
            "theta3" => cfg.theta3 = parse_angle(key, value)?,
            "theta4" => cfg.theta4 = parse_angle(key, value)?,
            "theta5" => cfg.theta5 = parse_angle(key, value)?,
            "omega" => cfg.omega = parse_angle(key, value)?,
            "n" => cfg.n = parse_u32(value)?,
            "f_stop" => cfg.f_stop = parse_f64(value)?,
            "f_fail" => cfg.f_fail = parse_f64(value)?,
            "delta_f" => cfg.delta_f = parse_f64(value)?,
            "delta_theta" => cfg.delta_theta = parse_angle(key, value)?,
            "angle_max" => cfg.angle_max = parse_angle(key, value)?,
            "omega_max" => cfg.omega_max = parse_angle(key, value)?,
            "filter_window" => cfg.filter_window = parse_usize(value)?,
            "grad_eps" => cfg.grad_eps = parse_f64(value)?,
            "tail_fraction" => cfg.tail_fraction = parse_f64(value)?,
            "plateau_window" => cfg.plateau_window = parse_usize(value)?,
            "plateau_eps" => cfg.plateau_eps = parse_f64(value)?,
            "fail_margin" => cfg.fail_margin = parse_f64(value)?,
            "loop_cap" => cfg.loop_cap = parse_u32(value)?,
            "spin_theta5" => cfg.spin_theta5 = parse_angle(key, value)?,
            "spin_omega" => cfg.spin_omega = parse_angle(key, value)?,
            "sample_period_ms" => cfg.sample_period_ms = parse_u32(value)?,
            "keep_traces" => {
                cfg.keep_traces = value
                    .parse()
                    .map_err(|_| invalid("expected true or false".into()))?
            }
            "n_rotations" => cfg.n_rotations = parse_usize(value)?,
            "n_heights" => cfg.n_heights = parse_usize(value)?,
            "top_k" => cfg.top_k = parse_usize(value)?,
            "mid_bias_alpha" => cfg.mid_bias_alpha = parse_f64(value)?,
            "gripper_open_width" => cfg.gripper_open_width = parse_f64(value)?,
            "gripper_finger_width" => cfg.gripper_finger_width = parse_f64(value)?,
            "gripper_jaw_len" => cfg.gripper_jaw_len = parse_f64(value)?,
            _ => return Err(ConfigError::UnknownKey(key.clone())),
        }
    }
    cfg.check()?;
    Ok(cfg)
}

/// Convenience wrapper: parse file content, then resolve.
pub fn load_config(content: &str) -> Result<ControllerConfig, ConfigError> {
    validate_config(&parse_key_values(content)?)
}
