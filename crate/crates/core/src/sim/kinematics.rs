//! Unicycle model of a differential-drive base.

use serde::{Deserialize, Serialize};

use super::track::wrap_angle;
use crate::controller::VelocityCommand;

/// Planar pose plus the terrain-induced body offset and tilt.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    /// Heading, radians in (-pi, pi].
    pub theta: f64,
    /// Ground height under the robot.
    pub z: f64,
    /// Nose-up positive.
    pub pitch: f64,
    /// Left-side-up positive.
    pub roll: f64,
}

impl RobotPose {
    pub fn planar(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            ..Default::default()
        }
    }
}

/// Exact integration over `dt` seconds with constant command: a circular arc
/// of radius `v / omega`, degenerating to a straight segment as `omega -> 0`.
///
/// Written as a chord of length `v dt sinc(omega dt / 2)` at the mid-arc
/// heading, which stays well conditioned for tiny `omega`.
pub fn step_kinematics(pose: &RobotPose, cmd: VelocityCommand, dt: f64) -> RobotPose {
    let VelocityCommand { v_x: v, omega_z: w } = cmd;
    let half = 0.5 * w * dt;
    let sinc = if half.abs() < 1e-4 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    let chord = v * dt * sinc;
    let mid = pose.theta + half;
    RobotPose {
        x: pose.x + chord * mid.cos(),
        y: pose.y + chord * mid.sin(),
        theta: wrap_angle(pose.theta + w * dt),
        ..*pose
    }
}
