//! Heading controller: row-center offset to smoothed velocity commands.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("EMA weight must lie in (0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("frame width must be positive")]
    ZeroWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// m/s
    pub v_max: f64,
    /// rad/s
    pub omega_max: f64,
    /// rad/s per pixel of offset
    pub omega_gain: f64,
    /// Weight of the newest command in the exponential moving average.
    pub ema_lambda: f64,
    pub frame_width: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            v_max: 0.5,
            omega_max: 1.0,
            omega_gain: 0.01,
            ema_lambda: ema_lambda_from_span(3),
            frame_width: 224,
        }
    }
}

/// Standard span-to-weight conversion for an EMA over `span` samples.
pub fn ema_lambda_from_span(span: usize) -> f64 {
    2.0 / (span as f64 + 1.0)
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        for (name, value) in [
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("omega_gain", self.omega_gain),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ControllerError::NonPositive { name, value });
            }
        }
        check_lambda(self.ema_lambda)?;
        if self.frame_width == 0 {
            return Err(ControllerError::ZeroWidth);
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<(), ControllerError> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(ControllerError::InvalidLambda(lambda))
    }
}

/// Linear and angular velocity pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    /// m/s
    pub v_x: f64,
    /// rad/s, positive counter-clockwise
    pub omega_z: f64,
}

impl VelocityCommand {
    pub const fn new(v_x: f64, omega_z: f64) -> Self {
        Self { v_x, omega_z }
    }
}

/// Signed pixel offset of the row center from the frame center.
pub fn compute_offset(x_h: f64, width: usize) -> f64 {
    x_h - width as f64 / 2.0
}

/// Quadratic speed law and proportional steering, both clamped.
pub fn compute_command(d: f64, cfg: &ControllerConfig) -> VelocityCommand {
    let half = cfg.frame_width as f64 / 2.0;
    let v_x = (cfg.v_max * (1.0 - d * d / (half * half))).clamp(0.0, cfg.v_max);
    let omega_z = (-cfg.omega_gain * d).clamp(-cfg.omega_max, cfg.omega_max);
    VelocityCommand { v_x, omega_z }
}

pub fn stop_command() -> VelocityCommand {
    VelocityCommand::new(0.0, 0.0)
}

/// EMA state over emitted commands.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CommandFilterState {
    previous: Option<VelocityCommand>,
}

impl CommandFilterState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn previous(&self) -> Option<VelocityCommand> {
        self.previous
    }

    pub fn is_initialized(&self) -> bool {
        self.previous.is_some()
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }
}

/// `(1 - lambda) * previous + lambda * cmd`. The first sample passes through.
pub fn ema_filter(
    state: &mut CommandFilterState,
    cmd: VelocityCommand,
    lambda: f64,
) -> Result<VelocityCommand, ControllerError> {
    check_lambda(lambda)?;
    let out = match state.previous {
        None => cmd,
        Some(prev) => VelocityCommand {
            v_x: (1.0 - lambda) * prev.v_x + lambda * cmd.v_x,
            omega_z: (1.0 - lambda) * prev.omega_z + lambda * cmd.omega_z,
        },
    };
    state.previous = Some(out);
    Ok(out)
}

/// Offset, command law and smoothing bundled for one control loop.
#[derive(Debug, Clone)]
pub struct HeadingController {
    cfg: ControllerConfig,
    filter: CommandFilterState,
}

/// One control update: the raw command and what the robot receives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// `None` when the row center was unavailable and a stop was issued.
    pub offset: Option<f64>,
    pub raw: VelocityCommand,
    pub smoothed: VelocityCommand,
}

impl HeadingController {
    pub fn new(cfg: ControllerConfig) -> Result<Self, ControllerError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            filter: CommandFilterState::new(),
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    /// `x_h = None` requests a stop.
    pub fn update(&mut self, x_h: Option<f64>) -> ControlOutput {
        let offset = x_h.map(|x| compute_offset(x, self.cfg.frame_width));
        let raw = offset.map_or_else(stop_command, |d| compute_command(d, &self.cfg));
        let smoothed = ema_filter(&mut self.filter, raw, self.cfg.ema_lambda)
            .expect("lambda validated at construction");
        ControlOutput {
            offset,
            raw,
            smoothed,
        }
    }
}
