//! Closed-loop episode: render, perceive, control, integrate.
//!
//! Time advances in fixed base ticks. Rendering, perception and control fire
//! on tick multiples of their own periods; each consumes the newest output of
//! the stage before it. Kinematics integrate every base tick with the last
//! smoothed command.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::camera::{camera_pose, CameraModel};
use super::kinematics::{step_kinematics, RobotPose};
use super::mask_source::{MaskNoise, MaskSource, NoisyMask, OracleMask};
use super::render::{apply_depth_noise, FrameObservation, Renderer};
use super::world::World;
use crate::controller::{ControllerConfig, ControllerError, HeadingController};
use crate::grid::DepthMap;
use crate::perception::{perceive, MaskBuffer, PerceptionConfig, PerceptionError, RowEstimate};
use crate::seed::rng_for;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("invalid rates: {0}")]
    Rates(String),
    #[error("invalid camera: {0}")]
    Camera(String),
    #[error("invalid mask noise: {0}")]
    MaskNoise(String),
    #[error("perception config rejected: {0}")]
    Perception(#[from] PerceptionError),
    #[error("controller config rejected: {0}")]
    Controller(#[from] ControllerError),
    #[error("camera is {camera} px wide but the controller expects {controller}")]
    FrameWidth { camera: usize, controller: usize },
}

/// Loop frequencies in Hz. Every stage rate must divide the base rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rates {
    pub base_hz: u32,
    pub render_hz: u32,
    pub perception_hz: u32,
    pub control_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            base_hz: 60,
            render_hz: 30,
            perception_hz: 20,
            control_hz: 5,
        }
    }
}

impl Rates {
    pub fn validate(&self) -> Result<(), EpisodeError> {
        if self.base_hz == 0 {
            return Err(EpisodeError::Rates("base rate must be positive".into()));
        }
        for (name, hz) in [
            ("render", self.render_hz),
            ("perception", self.perception_hz),
            ("control", self.control_hz),
        ] {
            if hz == 0 || self.base_hz % hz != 0 {
                return Err(EpisodeError::Rates(format!(
                    "{name} rate {hz} Hz must divide the base rate {} Hz",
                    self.base_hz
                )));
            }
        }
        Ok(())
    }

    /// Base ticks between firings of each stage: (render, perception, control).
    pub fn periods(&self) -> (u64, u64, u64) {
        let b = u64::from(self.base_hz);
        (
            b / u64::from(self.render_hz),
            b / u64::from(self.perception_hz),
            b / u64::from(self.control_hz),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeSettings {
    pub rates: Rates,
    /// Hard stop for episodes that never reach the end line, seconds.
    pub max_duration_s: f64,
    /// Multiplicative Gaussian depth noise; 0 disables it.
    pub depth_noise_sigma: f64,
    pub mask_noise: MaskNoise,
    pub camera: CameraModel,
    /// Seed for the episode's own random streams (sensor noise).
    pub seed: u64,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        Self {
            rates: Rates::default(),
            max_duration_s: 120.0,
            depth_noise_sigma: 0.0,
            mask_noise: MaskNoise::default(),
            camera: CameraModel::default(),
            seed: 0,
        }
    }
}

/// One control update: pose at the update and the commands it produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Row center column; `None` when perception reported no gap.
    pub x_h: Option<f64>,
    pub d: Option<f64>,
    pub v_x: f64,
    pub omega_z: f64,
    pub v_bar: f64,
    pub omega_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    /// End line crossed at `clearance_time` seconds.
    Completed { clearance_time: f64 },
    /// Lateral deviation exceeded the row distance.
    Diverged { time: f64, lateral: f64 },
    TimedOut,
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed { .. })
    }

    pub fn clearance_time(&self) -> Option<f64> {
        match self {
            Outcome::Completed { clearance_time } => Some(*clearance_time),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageCounts {
    pub renders: u64,
    pub perception_updates: u64,
    pub control_updates: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub log: Vec<LogRow>,
    pub counts: StageCounts,
    /// Control updates issued as stops because no row center was found.
    pub stop_events: u64,
    pub final_pose: RobotPose,
}

/// Hooks into the loop, mainly for frame dumps.
pub trait EpisodeObserver {
    fn on_render(&mut self, _tick: u64, _obs: &FrameObservation) {}
    fn on_perception(
        &mut self,
        _tick: u64,
        _buffer: &MaskBuffer,
        _depth: &DepthMap,
        _estimate: RowEstimate,
    ) {
    }
}

struct NoObserver;
impl EpisodeObserver for NoObserver {}

pub fn run_episode(
    world: &World,
    perception: &PerceptionConfig,
    controller: &ControllerConfig,
    settings: &EpisodeSettings,
) -> Result<EpisodeResult, EpisodeError> {
    run_episode_observed(world, perception, controller, settings, &mut NoObserver)
}

fn settle_on_terrain(world: &World, pose: RobotPose) -> RobotPose {
    let (pitch, roll) = world.terrain.tilt(pose.x, pose.y, pose.theta);
    RobotPose {
        z: world.terrain.height(pose.x, pose.y),
        pitch,
        roll,
        ..pose
    }
}

pub fn run_episode_observed(
    world: &World,
    perception: &PerceptionConfig,
    controller: &ControllerConfig,
    settings: &EpisodeSettings,
    observer: &mut dyn EpisodeObserver,
) -> Result<EpisodeResult, EpisodeError> {
    settings.rates.validate()?;
    settings.camera.validate().map_err(EpisodeError::Camera)?;
    settings.mask_noise.validate().map_err(EpisodeError::MaskNoise)?;
    perception.validate()?;
    if settings.camera.width != controller.frame_width {
        return Err(EpisodeError::FrameWidth {
            camera: settings.camera.width,
            controller: controller.frame_width,
        });
    }
    let mut heading = HeadingController::new(*controller)?;

    let renderer = Renderer::new(settings.camera);
    let mut buffer = MaskBuffer::new(perception.history)?;
    let mut source: Box<dyn MaskSource> = if settings.mask_noise.is_clean() {
        Box::new(OracleMask)
    } else {
        Box::new(NoisyMask::new(
            settings.mask_noise,
            rng_for(settings.seed, &["mask-noise"]),
        ))
    };
    let mut depth_rng = rng_for(settings.seed, &["depth-noise"]);

    let (render_every, perceive_every, control_every) = settings.rates.periods();
    let base_hz = f64::from(settings.rates.base_hz);
    let dt = 1.0 / base_hz;
    let track_length = world.config.track_length;
    let divergence_limit = world.config.row_distance;

    let (x0, y0, th0) = world.start();
    let mut pose = settle_on_terrain(world, RobotPose::planar(x0, y0, th0));
    let mut frame: Option<FrameObservation> = None;
    let mut estimate: Option<RowEstimate> = None;
    let mut command = crate::controller::stop_command();
    let mut log = Vec::new();
    let mut counts = StageCounts::default();
    let mut stop_events = 0;
    let mut outcome = Outcome::TimedOut;

    let mut tick: u64 = 0;
    while (tick as f64) / base_hz < settings.max_duration_s {
        let t = tick as f64 / base_hz;

        if tick % render_every == 0 {
            let mut obs = renderer.render(world, &camera_pose(&pose, &settings.camera), t);
            if settings.depth_noise_sigma > 0.0 {
                apply_depth_noise(
                    &mut obs,
                    settings.depth_noise_sigma,
                    settings.camera.max_range,
                    &mut depth_rng,
                );
            }
            observer.on_render(tick, &obs);
            frame = Some(obs);
            counts.renders += 1;
        }

        if tick % perceive_every == 0 {
            if let Some(obs) = &frame {
                buffer.push(source.segment(obs))?;
                let est = perceive(&buffer, &obs.depth, perception)?;
                observer.on_perception(tick, &buffer, &obs.depth, est);
                estimate = Some(est);
                counts.perception_updates += 1;
            }
        }

        if tick % control_every == 0 {
            if let Some(est) = estimate {
                let out = heading.update(est.center());
                if out.offset.is_none() {
                    stop_events += 1;
                }
                command = out.smoothed;
                log.push(LogRow {
                    t,
                    x: pose.x,
                    y: pose.y,
                    theta: pose.theta,
                    x_h: est.center(),
                    d: out.offset,
                    v_x: out.raw.v_x,
                    omega_z: out.raw.omega_z,
                    v_bar: out.smoothed.v_x,
                    omega_bar: out.smoothed.omega_z,
                });
                counts.control_updates += 1;
            }
        }

        let (s_prev, _) = world.corridor_coordinates(pose.x, pose.y);
        pose = settle_on_terrain(world, step_kinematics(&pose, command, dt));
        let (s_new, lateral) = world.corridor_coordinates(pose.x, pose.y);

        if s_new >= track_length && s_prev < track_length {
            let frac = (track_length - s_prev) / (s_new - s_prev);
            outcome = Outcome::Completed {
                clearance_time: t + frac * dt,
            };
            break;
        }
        if lateral.abs() > divergence_limit {
            outcome = Outcome::Diverged {
                time: t + dt,
                lateral,
            };
            break;
        }
        tick += 1;
    }

    Ok(EpisodeResult {
        outcome,
        log,
        counts,
        stop_events,
        final_pose: pose,
    })
}
