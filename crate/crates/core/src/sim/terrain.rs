//! Smooth pseudo-random ground undulation.
//!
//! The ground stays the plane z = 0 for rendering; undulation only lifts and
//! tilts the robot body, which in turn shakes the camera.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Upper bound on body pitch and roll induced by the terrain.
pub const MAX_TILT_RAD: f64 = 2.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub amplitude: f64,
    pub kx: f64,
    pub ky: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Terrain {
    pub waves: Vec<Wave>,
}

impl Terrain {
    pub fn flat() -> Self {
        Self::default()
    }

    /// Sum of a few plane waves with wavelengths between 2 and 6 m.
    /// `amplitude` bounds the height excursion.
    pub fn random(amplitude: f64, rng: &mut impl Rng) -> Self {
        const COMPONENTS: usize = 4;
        if amplitude <= 0.0 {
            return Self::flat();
        }
        let waves = (0..COMPONENTS)
            .map(|_| {
                let wavelength = rng.random_range(2.0..6.0);
                let dir = rng.random_range(0.0..std::f64::consts::TAU);
                let k = std::f64::consts::TAU / wavelength;
                Wave {
                    amplitude: amplitude / COMPONENTS as f64,
                    kx: k * dir.cos(),
                    ky: k * dir.sin(),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                }
            })
            .collect();
        Self { waves }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.waves
            .iter()
            .map(|w| w.amplitude * (w.kx * x + w.ky * y + w.phase).sin())
            .sum()
    }

    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        self.waves.iter().fold((0.0, 0.0), |(gx, gy), w| {
            let c = w.amplitude * (w.kx * x + w.ky * y + w.phase).cos();
            (gx + c * w.kx, gy + c * w.ky)
        })
    }

    /// Body `(pitch, roll)` for a robot at (x, y) facing `theta`.
    /// Pitch is nose-up positive, roll is left-side-up positive.
    pub fn tilt(&self, x: f64, y: f64, theta: f64) -> (f64, f64) {
        let (gx, gy) = self.gradient(x, y);
        let (s, c) = theta.sin_cos();
        let forward = gx * c + gy * s;
        let left = -gx * s + gy * c;
        (
            forward.atan().clamp(-MAX_TILT_RAD, MAX_TILT_RAD),
            left.atan().clamp(-MAX_TILT_RAD, MAX_TILT_RAD),
        )
    }

    pub fn mirrored(&self) -> Self {
        Self {
            waves: self
                .waves
                .iter()
                .map(|w| Wave { ky: -w.ky, ..*w })
                .collect(),
        }
    }
}
