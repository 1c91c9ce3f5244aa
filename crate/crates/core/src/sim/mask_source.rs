//! Stand-ins for the segmentation network.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::FrameObservation;
use crate::grid::VegetationMask;

/// Produces the vegetation mask the perception pipeline consumes.
pub trait MaskSource {
    fn segment(&mut self, obs: &FrameObservation) -> VegetationMask;
}

/// Exact vegetation visibility from the renderer.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleMask;

impl MaskSource for OracleMask {
    fn segment(&mut self, obs: &FrameObservation) -> VegetationMask {
        obs.mask.clone()
    }
}

/// Per-pixel label-flip rates of a simulated imperfect segmenter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskNoise {
    /// Probability that a background pixel is labelled vegetation.
    pub false_positive_rate: f64,
    /// Probability that a vegetation pixel is missed.
    pub false_negative_rate: f64,
}

impl MaskNoise {
    pub fn is_clean(&self) -> bool {
        self.false_positive_rate == 0.0 && self.false_negative_rate == 0.0
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("false_positive_rate", self.false_positive_rate),
            ("false_negative_rate", self.false_negative_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

/// Oracle mask with independent seeded label flips.
#[derive(Debug, Clone)]
pub struct NoisyMask {
    noise: MaskNoise,
    rng: ChaCha8Rng,
}

impl NoisyMask {
    pub fn new(noise: MaskNoise, rng: ChaCha8Rng) -> Self {
        Self { noise, rng }
    }
}

impl MaskSource for NoisyMask {
    fn segment(&mut self, obs: &FrameObservation) -> VegetationMask {
        let mut mask = obs.mask.clone();
        for cell in mask.cells_mut() {
            let flip = if *cell {
                self.noise.false_negative_rate
            } else {
                self.noise.false_positive_rate
            };
            if flip > 0.0 && self.rng.random_bool(flip) {
                *cell = !*cell;
            }
        }
        mask
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DepthMap;
    use rand::SeedableRng;

    fn frame() -> FrameObservation {
        let mut mask = VegetationMask::zeros(100, 100).unwrap();
        for j in 0..50 {
            for i in 0..100 {
                mask.set(i, j, true);
            }
        }
        FrameObservation {
            mask,
            depth: DepthMap::filled(100, 100, 1.0).unwrap(),
            timestamp: 0.0,
        }
    }

    #[test]
    fn oracle_is_exact() {
        let f = frame();
        assert_eq!(OracleMask.segment(&f), f.mask);
    }

    #[test]
    fn flip_rates_are_respected() {
        let f = frame();
        let noise = MaskNoise {
            false_positive_rate: 0.1,
            false_negative_rate: 0.0,
        };
        let mut src = NoisyMask::new(noise, ChaCha8Rng::seed_from_u64(1));
        let m = src.segment(&f);
        // every vegetation pixel kept, roughly 10% of background flipped
        let flipped = m.count_ones() - 5000;
        assert!((400..600).contains(&flipped), "{flipped}");
        assert!(MaskNoise { false_positive_rate: 1.5, ..noise }.validate().is_err());
    }
}
