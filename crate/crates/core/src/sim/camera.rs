//! Mounted pinhole depth camera.

use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use super::kinematics::RobotPose;
use super::shapes::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraModel {
    /// Mount position ahead of the robot center, meters.
    pub forward_offset: f64,
    /// Mount height above the ground, meters.
    pub mount_height: f64,
    /// Upward tilt of the optical axis, degrees.
    pub pitch_deg: f64,
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    /// Returns beyond this range are dropped, meters.
    pub max_range: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            forward_offset: 0.20,
            mount_height: 0.4,
            pitch_deg: 15.0,
            width: 224,
            height: 224,
            hfov_deg: 87.0,
            vfov_deg: 58.0,
            max_range: 12.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("camera image must be non-empty".into());
        }
        for (name, fov) in [("hfov_deg", self.hfov_deg), ("vfov_deg", self.vfov_deg)] {
            if !(fov > 0.0 && fov < 180.0) {
                return Err(format!("{name} must lie in (0, 180), got {fov}"));
            }
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return Err(format!("max_range must be positive, got {}", self.max_range));
        }
        Ok(())
    }

    /// Focal lengths in pixels, `(fx, fy)`.
    pub fn focal(&self) -> (f64, f64) {
        (
            self.width as f64 / 2.0 / (self.hfov_deg.to_radians() / 2.0).tan(),
            self.height as f64 / 2.0 / (self.vfov_deg.to_radians() / 2.0).tan(),
        )
    }

    /// Left and up slopes of the ray through the center of pixel `(i, j)`.
    /// Column 0 looks left, row 0 looks up.
    pub fn pixel_slopes(&self, i: usize, j: usize) -> (f64, f64) {
        let (fx, fy) = self.focal();
        (
            -((j as f64 + 0.5) - self.width as f64 / 2.0) / fx,
            -((i as f64 + 0.5) - self.height as f64 / 2.0) / fy,
        )
    }
}

/// Camera origin and orientation in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub origin: Vec3,
    /// Columns are the forward, left and up axes.
    pub axes: Matrix3<f64>,
}

impl CameraPose {
    pub fn forward(&self) -> Vec3 {
        self.axes.column(0).into()
    }
    pub fn left(&self) -> Vec3 {
        self.axes.column(1).into()
    }
    pub fn up(&self) -> Vec3 {
        self.axes.column(2).into()
    }

    /// Expresses a world point in (forward, left, up) camera coordinates.
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.axes.transpose() * (p - self.origin)
    }

    /// Elevation of the optical axis above the horizontal plane, radians.
    pub fn pitch(&self) -> f64 {
        self.forward().z.asin()
    }
}

/// Body orientation: yaw, then terrain pitch (nose up) and roll (left up).
fn body_rotation(pose: &RobotPose) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vec3::z_axis(), pose.theta)
        * Rotation3::from_axis_angle(&Vec3::y_axis(), -pose.pitch)
        * Rotation3::from_axis_angle(&Vec3::x_axis(), pose.roll)
}

pub fn camera_pose(pose: &RobotPose, cam: &CameraModel) -> CameraPose {
    let body = body_rotation(pose);
    let origin = Vec3::new(pose.x, pose.y, pose.z)
        + body * Vec3::new(cam.forward_offset, 0.0, cam.mount_height);
    let tilt = Rotation3::from_axis_angle(&Vec3::y_axis(), -cam.pitch_deg.to_radians());
    CameraPose {
        origin,
        axes: (body * tilt).into_inner(),
    }
}
