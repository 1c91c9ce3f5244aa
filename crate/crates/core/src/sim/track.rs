//! Nominal row-corridor geometry in (station, lateral) coordinates.
//!
//! Station is arc length along the corridor centerline starting at the world
//! origin with heading +x. Lateral offset is positive to the left.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Track {
    Straight,
    /// Constant curvature in 1/m; positive bends left.
    Arc { curvature: f64 },
}

impl Track {
    pub fn from_curvature(curvature: f64) -> Self {
        if curvature == 0.0 {
            Track::Straight
        } else {
            Track::Arc { curvature }
        }
    }

    /// World (x, y) of the point at `station` with lateral offset `lateral`.
    pub fn point(&self, station: f64, lateral: f64) -> (f64, f64) {
        match *self {
            Track::Straight => (station, lateral),
            Track::Arc { curvature } => {
                let radius = 1.0 / curvature.abs();
                let sign = curvature.signum();
                let heading = station * curvature;
                let cx = radius * (station / radius).sin();
                let cy = sign * radius * (1.0 - (station / radius).cos());
                (cx - lateral * heading.sin(), cy + lateral * heading.cos())
            }
        }
    }

    /// Centerline tangent heading at `station`.
    pub fn heading(&self, station: f64) -> f64 {
        match *self {
            Track::Straight => 0.0,
            Track::Arc { curvature } => station * curvature,
        }
    }

    /// Inverse of [`Track::point`]: `(station, lateral)` of a world point.
    pub fn project(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Track::Straight => (x, y),
            Track::Arc { curvature } => {
                let radius = 1.0 / curvature.abs();
                let sign = curvature.signum();
                let (vx, vy) = (x, y - sign * radius);
                let r = vx.hypot(vy);
                // Angle swept from the start point, measured in the travel direction.
                let alpha = vy.atan2(vx);
                let swept = if sign > 0.0 {
                    alpha + PI / 2.0
                } else {
                    PI / 2.0 - alpha
                };
                (radius * wrap_angle(swept), sign * (radius - r))
            }
        }
    }

    /// Mirror image across the starting centerline (y -> -y).
    pub fn mirrored(&self) -> Self {
        match *self {
            Track::Straight => Track::Straight,
            Track::Arc { curvature } => Track::Arc {
                curvature: -curvature,
            },
        }
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_track_is_identity() {
        let t = Track::Straight;
        assert_eq!(t.point(3.0, -0.5), (3.0, -0.5));
        assert_eq!(t.project(3.0, -0.5), (3.0, -0.5));
    }

    #[test]
    fn arc_point_project_roundtrip() {
        for curvature in [0.05, -0.05, 0.2] {
            let t = Track::Arc { curvature };
            for &(s, l) in &[(0.0, 0.0), (5.0, 0.9), (12.3, -0.9), (-2.0, 0.3)] {
                let (x, y) = t.point(s, l);
                let (s2, l2) = t.project(x, y);
                assert!((s - s2).abs() < 1e-9 && (l - l2).abs() < 1e-9, "{curvature} {s} {l}");
            }
        }
    }

    #[test]
    fn arc_matches_closed_form() {
        let t = Track::Arc { curvature: 0.05 };
        let (x, y) = t.point(20.0 * PI / 2.0, 0.0);
        assert!((x - 20.0).abs() < 1e-9 && (y - 20.0).abs() < 1e-9);
        assert!((t.heading(20.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
        // lateral to the left of a left turn moves toward the center of curvature
        let (x, y) = t.point(0.0, 1.0);
        assert!(x.abs() < 1e-12 && (y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrap_into_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
