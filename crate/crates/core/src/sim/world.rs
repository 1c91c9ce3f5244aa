//! Procedural crop-row worlds.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::shapes::Primitive;
use super::terrain::Terrain;
use super::track::Track;
use crate::path::Polyline;
use crate::seed::rng_for;

/// Centerline sampling step upper bound, meters.
pub const CENTERLINE_STEP: f64 = 0.1;
/// Along-track plant jitter as a fraction of plant spacing.
pub const PLANT_JITTER: f64 = 0.1;
/// Rows extend this far past the track end so the camera never runs out of scene.
const TRAILING_MARGIN: f64 = 16.0;
/// Fraction of the pergola row distance roofed by the canopy slab.
const PERGOLA_ROOF_FRACTION: f64 = 0.4;
const PERGOLA_SLAB_THICKNESS: f64 = 0.3;
/// Rows planted beyond each side of the corridor.
const NEIGHBOR_ROWS: usize = 1;
/// Lowest foliage of a high tree crown, meters above ground.
const HIGH_TREE_FOLIAGE_BASE: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("curvature {curvature} too tight for row distance {row_distance}")]
    CurvatureTooTight { curvature: f64, row_distance: f64 },
    #[error("unknown crop {0:?}")]
    UnknownCrop(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crop {
    CommonVineyard,
    PergolaVineyard,
    PearField,
    HighTreesField,
}

impl Crop {
    pub const ALL: [Crop; 4] = [
        Crop::CommonVineyard,
        Crop::PergolaVineyard,
        Crop::PearField,
        Crop::HighTreesField,
    ];

    /// `(row distance, plant distance, plant height)` in meters.
    pub fn dimensions(self) -> (f64, f64, f64) {
        match self {
            Crop::CommonVineyard => (1.8, 1.3, 2.0),
            Crop::PergolaVineyard => (6.0, 1.5, 2.9),
            Crop::PearField => (2.0, 1.0, 2.9),
            Crop::HighTreesField => (7.0, 5.0, 12.5),
        }
    }

    /// Depth gate used for this crop, meters.
    pub fn depth_threshold(self) -> f64 {
        match self {
            Crop::CommonVineyard => 5.0,
            Crop::PergolaVineyard | Crop::PearField => 8.0,
            Crop::HighTreesField => 10.0,
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Crop::CommonVineyard => "common_vineyard",
            Crop::PergolaVineyard => "pergola_vineyard",
            Crop::PearField => "pear_field",
            Crop::HighTreesField => "high_trees_field",
        }
    }
}

impl fmt::Display for Crop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Crop {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        Crop::ALL
            .into_iter()
            .find(|c| c.slug() == norm)
            .ok_or_else(|| WorldError::UnknownCrop(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub crop: Crop,
    pub row_distance: f64,
    pub plant_distance: f64,
    pub plant_height: f64,
    pub track_length: f64,
    /// 1/m, 0 for straight rows, positive bends left.
    pub curvature: f64,
    pub jitter_seed: u64,
    /// Terrain height amplitude, meters.
    pub terrain_roughness: f64,
}

impl WorldConfig {
    pub fn for_crop(crop: Crop) -> Self {
        let (row_distance, plant_distance, plant_height) = crop.dimensions();
        Self {
            crop,
            row_distance,
            plant_distance,
            plant_height,
            track_length: 20.0,
            curvature: 0.0,
            jitter_seed: 0,
            terrain_roughness: 0.02,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.jitter_seed = seed;
        self
    }

    pub fn with_curvature(mut self, curvature: f64) -> Self {
        self.curvature = curvature;
        self
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        for (name, value) in [
            ("row_distance", self.row_distance),
            ("plant_distance", self.plant_distance),
            ("plant_height", self.plant_height),
            ("track_length", self.track_length),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(WorldError::NonPositive { name, value });
            }
        }
        if !self.terrain_roughness.is_finite() || self.terrain_roughness < 0.0 {
            return Err(WorldError::NonPositive {
                name: "terrain_roughness",
                value: self.terrain_roughness,
            });
        }
        let outermost = self.row_distance * (0.5 + NEIGHBOR_ROWS as f64);
        if !self.curvature.is_finite() || self.curvature.abs() * outermost >= 1.0 {
            return Err(WorldError::CurvatureTooTight {
                curvature: self.curvature,
                row_distance: self.row_distance,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSide {
    Left,
    Right,
    /// Outside the corridor; scenery only.
    NeighborLeft,
    NeighborRight,
}

impl RowSide {
    pub fn mirrored(self) -> Self {
        match self {
            RowSide::Left => RowSide::Right,
            RowSide::Right => RowSide::Left,
            RowSide::NeighborLeft => RowSide::NeighborRight,
            RowSide::NeighborRight => RowSide::NeighborLeft,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub row: RowSide,
    /// Along-track station of the plant, meters.
    pub station: f64,
    pub position: [f64; 2],
}

/// A point on a corridor boundary tagged with its station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub station: f64,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    pub track: Track,
    pub plants: Vec<Plant>,
    pub primitives: Vec<Primitive>,
    /// Left edge of the free corridor (left row, or the pergola roof edge).
    pub left_boundary: Vec<BoundaryPoint>,
    pub right_boundary: Vec<BoundaryPoint>,
    /// Lateral offset of the free corridor's center from the track centerline.
    pub corridor_lateral: f64,
    pub terrain: Terrain,
}

/// Builds the world for `cfg`. Deterministic in `cfg.jitter_seed`.
pub fn generate_world(cfg: &WorldConfig) -> Result<World, WorldError> {
    cfg.validate()?;
    let track = Track::from_curvature(cfg.curvature);
    let mut plant_rng = rng_for(cfg.jitter_seed, &["plants", cfg.crop.slug()]);
    let mut terrain_rng = rng_for(cfg.jitter_seed, &["terrain", cfg.crop.slug()]);

    let half = cfg.row_distance / 2.0;
    let first = -2.0 * cfg.plant_distance;
    let last = cfg.track_length + TRAILING_MARGIN + 2.0 * cfg.plant_distance;

    let mut plants = Vec::new();
    let mut primitives = Vec::new();
    let mut rows = vec![(RowSide::Left, half), (RowSide::Right, -half)];
    for k in 1..=NEIGHBOR_ROWS {
        let offset = half + k as f64 * cfg.row_distance;
        rows.push((RowSide::NeighborLeft, offset));
        rows.push((RowSide::NeighborRight, -offset));
    }
    for (row, lateral) in rows {
        // Spacing is measured along each row's own arc.
        let scale = 1.0 - cfg.curvature * lateral;
        let step = cfg.plant_distance / scale;
        let count = ((last - first) / step).ceil() as usize + 1;
        for k in 0..count {
            let nominal = first + k as f64 * step;
            let jitter = plant_rng.random_range(-PLANT_JITTER..=PLANT_JITTER) * step;
            let station = nominal + jitter;
            let (x, y) = track.point(station, lateral);
            plants.push(Plant {
                row,
                station,
                position: [x, y],
            });
            plant_shapes(cfg, [x, y], track.heading(station), &mut primitives);
        }
    }

    let boundary = |side: RowSide| -> Vec<BoundaryPoint> {
        plants
            .iter()
            .filter(|p| p.row == side)
            .map(|p| BoundaryPoint {
                station: p.station,
                position: p.position,
            })
            .collect()
    };
    let right_boundary = boundary(RowSide::Right);
    let (left_boundary, corridor_lateral) = if cfg.crop == Crop::PergolaVineyard {
        let (edge, roof) = pergola_roof(cfg, &track, first, last);
        primitives.extend(roof);
        let edge_lateral = half - PERGOLA_ROOF_FRACTION * cfg.row_distance;
        (edge, (edge_lateral - half) / 2.0)
    } else {
        (boundary(RowSide::Left), 0.0)
    };

    Ok(World {
        config: *cfg,
        track,
        plants,
        primitives,
        left_boundary,
        right_boundary,
        corridor_lateral,
        terrain: Terrain::random(cfg.terrain_roughness, &mut terrain_rng),
    })
}

fn plant_shapes(cfg: &WorldConfig, [x, y]: [f64; 2], heading: f64, out: &mut Vec<Primitive>) {
    let h = cfg.plant_height;
    match cfg.crop {
        Crop::CommonVineyard | Crop::PergolaVineyard => {
            let post_height = if cfg.crop == Crop::PergolaVineyard { h } else { 0.6 };
            out.push(Primitive::Capsule {
                base: [x, y, 0.0],
                radius: 0.05,
                height: post_height,
            });
            let (bottom, top) = (0.5, h.min(2.0));
            out.push(Primitive::Ellipsoid {
                center: [x, y, (bottom + top) / 2.0],
                radii: [0.6 * cfg.plant_distance, 0.3, (top - bottom) / 2.0],
                yaw: heading,
            });
        }
        Crop::PearField => {
            out.push(Primitive::Cylinder {
                base: [x, y, 0.0],
                radius: 0.08,
                height: 0.45 * h,
            });
            out.push(Primitive::Sphere {
                center: [x, y, 0.6 * h],
                radius: 0.3 * cfg.row_distance,
            });
            let crown = 0.14 * h;
            out.push(Primitive::Sphere {
                center: [x, y, h - crown],
                radius: crown,
            });
        }
        Crop::HighTreesField => {
            out.push(Primitive::Cylinder {
                base: [x, y, 0.0],
                radius: 0.25,
                height: 0.5 * h,
            });
            let canopy = cfg.row_distance / 2.0 + 0.75;
            let half_height = (h - HIGH_TREE_FOLIAGE_BASE) / 2.0;
            out.push(Primitive::Ellipsoid {
                center: [x, y, HIGH_TREE_FOLIAGE_BASE + half_height],
                radii: [canopy, canopy, half_height],
                yaw: heading,
            });
        }
    }
}

/// Roof slab over the left part of a pergola corridor, and its inner edge.
fn pergola_roof(
    cfg: &WorldConfig,
    track: &Track,
    first: f64,
    last: f64,
) -> (Vec<BoundaryPoint>, Vec<Primitive>) {
    let half = cfg.row_distance / 2.0;
    let width = PERGOLA_ROOF_FRACTION * cfg.row_distance;
    let center_lateral = half - width / 2.0;
    let edge_lateral = half - width;
    let step = cfg.plant_distance;
    let count = ((last - first) / step).ceil() as usize + 1;
    let mut edge = Vec::with_capacity(count);
    let mut roof = Vec::with_capacity(count);
    for k in 0..count {
        let station = first + k as f64 * step;
        let (x, y) = track.point(station, center_lateral);
        roof.push(Primitive::OrientedBox {
            center: [x, y, cfg.plant_height - PERGOLA_SLAB_THICKNESS / 2.0],
            half_extents: [step / 2.0 + 0.05, width / 2.0, PERGOLA_SLAB_THICKNESS / 2.0],
            yaw: track.heading(station),
        });
        let (ex, ey) = track.point(station, edge_lateral);
        edge.push(BoundaryPoint {
            station,
            position: [ex, ey],
        });
    }
    (edge, roof)
}

fn interpolate(boundary: &[BoundaryPoint], station: f64) -> [f64; 2] {
    let idx = boundary.partition_point(|p| p.station < station);
    if idx == 0 {
        return boundary[0].position;
    }
    if idx == boundary.len() {
        return boundary[boundary.len() - 1].position;
    }
    let (a, b) = (&boundary[idx - 1], &boundary[idx]);
    let span = b.station - a.station;
    let u = if span > 0.0 {
        (station - a.station) / span
    } else {
        0.0
    };
    [
        a.position[0] + u * (b.position[0] - a.position[0]),
        a.position[1] + u * (b.position[1] - a.position[1]),
    ]
}

/// Reference path: pointwise mean of the two interpolated corridor boundaries,
/// sampled at most every [`CENTERLINE_STEP`] meters of station.
pub fn ground_truth_centerline(world: &World) -> Polyline {
    let mut left = world.left_boundary.clone();
    let mut right = world.right_boundary.clone();
    if left.is_empty() || right.is_empty() {
        return Polyline::new(Vec::new());
    }
    left.sort_by(|a, b| a.station.total_cmp(&b.station));
    right.sort_by(|a, b| a.station.total_cmp(&b.station));
    let lo = left[0].station.max(right[0].station);
    let hi = left[left.len() - 1]
        .station
        .min(right[right.len() - 1].station);
    if hi <= lo {
        return Polyline::new(Vec::new());
    }
    let n = ((hi - lo) / CENTERLINE_STEP).ceil() as usize;
    let points = (0..=n)
        .map(|k| {
            let s = lo + (hi - lo) * k as f64 / n as f64;
            let a = interpolate(&left, s);
            let b = interpolate(&right, s);
            [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
        })
        .collect();
    Polyline::new(points)
}

impl World {
    /// A world with no plants, for rendering tests.
    pub fn empty(cfg: WorldConfig) -> Self {
        World {
            config: cfg,
            track: Track::from_curvature(cfg.curvature),
            plants: Vec::new(),
            primitives: Vec::new(),
            left_boundary: Vec::new(),
            right_boundary: Vec::new(),
            corridor_lateral: 0.0,
            terrain: Terrain::flat(),
        }
    }

    /// Reflection across the starting centerline. Left and right swap.
    pub fn mirrored(&self) -> Self {
        let flip = |b: &Vec<BoundaryPoint>| -> Vec<BoundaryPoint> {
            b.iter()
                .map(|p| BoundaryPoint {
                    station: p.station,
                    position: [p.position[0], -p.position[1]],
                })
                .collect()
        };
        World {
            config: WorldConfig {
                curvature: -self.config.curvature,
                ..self.config
            },
            track: self.track.mirrored(),
            plants: self
                .plants
                .iter()
                .map(|p| Plant {
                    row: p.row.mirrored(),
                    station: p.station,
                    position: [p.position[0], -p.position[1]],
                })
                .collect(),
            primitives: self.primitives.iter().map(Primitive::mirrored).collect(),
            left_boundary: flip(&self.right_boundary),
            right_boundary: flip(&self.left_boundary),
            corridor_lateral: -self.corridor_lateral,
            terrain: self.terrain.mirrored(),
        }
    }

    /// Station and lateral offset of a point relative to the free corridor center.
    pub fn corridor_coordinates(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, l) = self.track.project(x, y);
        (s, l - self.corridor_lateral)
    }

    /// Start pose `(x, y, heading)` at station 0 on the corridor center.
    pub fn start(&self) -> (f64, f64, f64) {
        let (x, y) = self.track.point(0.0, self.corridor_lateral);
        (x, y, self.track.heading(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vineyard_spacing_and_rows() {
        let cfg = WorldConfig {
            terrain_roughness: 0.0,
            ..WorldConfig::for_crop(Crop::CommonVineyard)
        };
        let world = generate_world(&cfg).unwrap();
        let left: Vec<&Plant> = world.plants.iter().filter(|p| p.row == RowSide::Left).collect();
        for p in &world.plants {
            let expected = match p.row {
                RowSide::Left => 0.9,
                RowSide::Right => -0.9,
                RowSide::NeighborLeft => 2.7,
                RowSide::NeighborRight => -2.7,
            };
            assert!((p.position[1] - expected).abs() < 1e-12);
        }
        for pair in left.windows(2) {
            let gap = pair[1].position[0] - pair[0].position[0];
            assert!((gap - 1.3).abs() <= 2.0 * PLANT_JITTER * 1.3 + 1e-12);
        }
        // mean spacing recovers the nominal 1.3 m
        let span = left.last().unwrap().station - left[0].station;
        let mean = span / (left.len() - 1) as f64;
        assert!((mean - 1.3).abs() < 0.02, "{mean}");
    }

    #[test]
    fn same_seed_same_world() {
        let cfg = WorldConfig::for_crop(Crop::PearField).with_seed(9);
        assert_eq!(generate_world(&cfg).unwrap(), generate_world(&cfg).unwrap());
        let other = generate_world(&cfg.with_seed(10)).unwrap();
        assert_ne!(generate_world(&cfg).unwrap().plants, other.plants);
    }

    #[test]
    fn straight_centerline_is_midline() {
        let world = generate_world(&WorldConfig::for_crop(Crop::CommonVineyard)).unwrap();
        let line = ground_truth_centerline(&world);
        assert!(line.points().iter().all(|p| p[1].abs() < 1e-12));
        for w in line.points().windows(2) {
            assert!(w[1][0] - w[0][0] <= CENTERLINE_STEP + 1e-12);
        }
    }

    #[test]
    fn offset_rows_centerline() {
        let mut world = World::empty(WorldConfig::for_crop(Crop::CommonVineyard));
        for k in 0..10 {
            let s = k as f64;
            world.left_boundary.push(BoundaryPoint {
                station: s,
                position: [s, 1.8],
            });
            world.right_boundary.push(BoundaryPoint {
                station: s,
                position: [s, 0.0],
            });
        }
        let line = ground_truth_centerline(&world);
        assert!(line.points().iter().all(|p| (p[1] - 0.9).abs() < 1e-12));
    }

    #[test]
    fn curved_centerline_follows_arc() {
        let cfg = WorldConfig::for_crop(Crop::CommonVineyard).with_curvature(0.05);
        let world = generate_world(&cfg).unwrap();
        let line = ground_truth_centerline(&world);
        // closed-form midpoint arc: radius 20 about (0, 20); chord sag between
        // plants bounds the deviation by c^2 / (8 r) with c <= 1.6 m
        let tol = 1.6f64.powi(2) / (8.0 * 19.1);
        for p in line.points() {
            let r = p[0].hypot(p[1] - 20.0);
            assert!((r - 20.0).abs() < tol, "{p:?} r={r}");
        }
    }

    #[test]
    fn high_tree_canopies_overlap_over_centerline() {
        let world = generate_world(&WorldConfig::for_crop(Crop::HighTreesField)).unwrap();
        let reaches = world.primitives.iter().any(|p| match p {
            Primitive::Ellipsoid { center, radii, .. } => center[1] > 0.0 && center[1] - radii[1] < -0.5,
            _ => false,
        });
        assert!(reaches);
    }

    #[test]
    fn pergola_corridor_is_offset() {
        let world = generate_world(&WorldConfig::for_crop(Crop::PergolaVineyard)).unwrap();
        assert!((world.corridor_lateral + 1.2).abs() < 1e-12);
        let line = ground_truth_centerline(&world);
        assert!(line.points().iter().all(|p| (p[1] + 1.2).abs() < 1e-9));
        let mirrored = world.mirrored();
        assert!((mirrored.corridor_lateral - 1.2).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = WorldConfig::for_crop(Crop::CommonVineyard);
        cfg.row_distance = 0.0;
        assert!(generate_world(&cfg).is_err());
        let cfg = WorldConfig::for_crop(Crop::CommonVineyard).with_curvature(1.0);
        assert!(generate_world(&cfg).is_err());
    }

    #[test]
    fn crop_names_parse() {
        assert_eq!("high-trees-field".parse::<Crop>().unwrap(), Crop::HighTreesField);
        assert!("orchard".parse::<Crop>().is_err());
    }
}
