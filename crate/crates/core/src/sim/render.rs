//! Ray-cast depth and oracle vegetation mask.
//!
//! Each pixel's ray is tested against the ground plane z = 0 and every plant
//! primitive whose projected bounding sphere covers it. The nearest plant hit
//! within range marks the pixel as vegetation. Rows are processed in
//! parallel, each pixel independently, so output is identical to a sequential
//! pass.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::camera::{CameraModel, CameraPose};
use super::shapes::{Primitive, Vec3};
use super::world::World;
use crate::grid::{DepthMap, Grid, VegetationMask, NO_RETURN};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub mask: VegetationMask,
    pub depth: DepthMap,
    /// Seconds since episode start.
    pub timestamp: f64,
}

/// Pixel rectangle (inclusive) that may see a primitive.
#[derive(Debug, Clone, Copy)]
struct Footprint {
    primitive: usize,
    rows: (usize, usize),
    cols: (usize, usize),
}

/// Renderer with per-pixel ray slopes cached for one camera model.
#[derive(Debug, Clone)]
pub struct Renderer {
    cam: CameraModel,
    slopes: Vec<(f64, f64)>,
}

impl Renderer {
    pub fn new(cam: CameraModel) -> Self {
        let slopes = (0..cam.height)
            .flat_map(|i| (0..cam.width).map(move |j| (i, j)))
            .map(|(i, j)| cam.pixel_slopes(i, j))
            .collect();
        Self { cam, slopes }
    }

    pub fn camera(&self) -> &CameraModel {
        &self.cam
    }

    /// Range of pixel columns (or rows) whose slope can fall in `[lo, hi]`.
    fn pixel_span(lo: f64, hi: f64, size: usize, focal: f64) -> Option<(usize, usize)> {
        // slope = -((k + 0.5) - size / 2) / focal
        let center = size as f64 / 2.0 - 0.5;
        let first = (center - hi * focal).floor() - 1.0;
        let last = (center - lo * focal).ceil() + 1.0;
        if last < 0.0 || first > (size - 1) as f64 {
            return None;
        }
        Some((first.max(0.0) as usize, (last as usize).min(size - 1)))
    }

    fn footprint(&self, index: usize, prim: &Primitive, pose: &CameraPose) -> Option<Footprint> {
        let (center, radius) = prim.bounding_sphere();
        if (center - pose.origin).norm() - radius > self.cam.max_range {
            return None;
        }
        let full = Footprint {
            primitive: index,
            rows: (0, self.cam.height - 1),
            cols: (0, self.cam.width - 1),
        };
        let c = pose.to_camera(&center);
        if c.x + radius < 0.0 {
            return None;
        }
        if c.x <= radius * (1.0 + 1e-9) {
            return Some(full);
        }
        // Tangent lines from the camera to the sphere's projection on each plane.
        let slope_range = |lateral: f64| {
            let phi = lateral.atan2(c.x);
            let delta = (radius / c.x.hypot(lateral)).asin();
            ((phi - delta).tan(), (phi + delta).tan())
        };
        let (fx, fy) = self.cam.focal();
        let (a_lo, a_hi) = slope_range(c.y);
        let (b_lo, b_hi) = slope_range(c.z);
        let cols = Self::pixel_span(a_lo, a_hi, self.cam.width, fx)?;
        let rows = Self::pixel_span(b_lo, b_hi, self.cam.height, fy)?;
        Some(Footprint {
            primitive: index,
            rows,
            cols,
        })
    }

    pub fn render(&self, world: &World, pose: &CameraPose, timestamp: f64) -> FrameObservation {
        let (w, h) = (self.cam.width, self.cam.height);
        let max_range = self.cam.max_range;
        let (f, l, u) = (pose.forward(), pose.left(), pose.up());
        let dirs: Vec<Vec3> = self
            .slopes
            .iter()
            .map(|&(a, b)| (f + l * a + u * b).normalize())
            .collect();
        let footprints: Vec<Footprint> = world
            .primitives
            .iter()
            .enumerate()
            .filter_map(|(k, p)| self.footprint(k, p, pose))
            .collect();

        let origin = pose.origin;
        let mut depth = vec![NO_RETURN; w * h];
        let mut mask = vec![false; w * h];
        depth
            .par_chunks_mut(w)
            .zip(mask.par_chunks_mut(w))
            .enumerate()
            .for_each(|(i, (drow, mrow))| {
                let row_dirs = &dirs[i * w..(i + 1) * w];
                for (d, dir) in drow.iter_mut().zip(row_dirs) {
                    if dir.z < 0.0 {
                        let t = -origin.z / dir.z;
                        if t <= max_range {
                            *d = t;
                        }
                    }
                }
                for fp in footprints
                    .iter()
                    .filter(|fp| fp.rows.0 <= i && i <= fp.rows.1)
                {
                    let prim = &world.primitives[fp.primitive];
                    for j in fp.cols.0..=fp.cols.1 {
                        if let Some(t) = prim.intersect(&origin, &row_dirs[j]) {
                            if t <= max_range && t < drow[j] {
                                drow[j] = t;
                                mrow[j] = true;
                            }
                        }
                    }
                }
            });

        FrameObservation {
            mask: VegetationMask::from_cells(w, h, mask).expect("camera dims validated"),
            depth: DepthMap::from_cells(w, h, depth).expect("ranges are finite"),
            timestamp,
        }
    }
}

/// One-shot render.
pub fn render(world: &World, pose: &CameraPose, cam: &CameraModel) -> FrameObservation {
    Renderer::new(*cam).render(world, pose, 0.0)
}

/// Multiplies every in-range depth by `1 + sigma * N(0, 1)`, keeping the
/// result inside `[0, max_range)`.
pub fn apply_depth_noise(
    obs: &mut FrameObservation,
    sigma: f64,
    max_range: f64,
    rng: &mut impl Rng,
) {
    let (w, h) = obs.depth.dims();
    let cells: Vec<f64> = obs
        .depth
        .cells()
        .iter()
        .map(|&d| {
            if d >= NO_RETURN {
                d
            } else {
                let z: f64 = rng.sample(StandardNormal);
                (d * (1.0 + sigma * z)).clamp(0.0, max_range * (1.0 - 1e-12))
            }
        })
        .collect();
    obs.depth = DepthMap::from_cells(w, h, cells).expect("noise keeps ranges finite");
}
