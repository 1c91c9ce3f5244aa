//! Plant primitives and ray intersection.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

const EPS: f64 = 1e-9;

/// A primitive solid. All shapes stand upright; `yaw` rotates about +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Primitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Ellipsoid {
        center: [f64; 3],
        /// Semi-axes along the yawed x, yawed y and z.
        radii: [f64; 3],
        yaw: f64,
    },
    /// Vertical capped cylinder from `base` up by `height`.
    Cylinder {
        base: [f64; 3],
        radius: f64,
        height: f64,
    },
    /// Vertical segment from `base` up by `height`, swept by `radius`.
    Capsule {
        base: [f64; 3],
        radius: f64,
        height: f64,
    },
    OrientedBox {
        center: [f64; 3],
        half_extents: [f64; 3],
        yaw: f64,
    },
}

fn v(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Smallest root of `a t^2 + 2 b t + c = 0` greater than EPS.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if a <= 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-b - sq) / a;
    if t0 > EPS {
        return Some(t0);
    }
    let t1 = (-b + sq) / a;
    (t1 > EPS).then_some(t1)
}

fn ray_sphere(origin: &Vec3, dir: &Vec3, center: &Vec3, radius: f64) -> Option<f64> {
    let oc = origin - center;
    smallest_positive_root(dir.dot(dir), oc.dot(dir), oc.dot(&oc) - radius * radius)
}

fn to_local(origin: &Vec3, dir: &Vec3, center: &Vec3, yaw: f64) -> (Vec3, Vec3) {
    let (s, c) = yaw.sin_cos();
    let rel = origin - center;
    let o = Vec3::new(c * rel.x + s * rel.y, -s * rel.x + c * rel.y, rel.z);
    let d = Vec3::new(c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z);
    (o, d)
}

/// Side wall of a vertical cylinder, limited to z in [z0, z1].
fn ray_cylinder_side(origin: &Vec3, dir: &Vec3, axis: (f64, f64), radius: f64, z0: f64, z1: f64) -> Option<f64> {
    let (ox, oy) = (origin.x - axis.0, origin.y - axis.1);
    let a = dir.x * dir.x + dir.y * dir.y;
    let b = ox * dir.x + oy * dir.y;
    let c = ox * ox + oy * oy - radius * radius;
    if a <= 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    [(-b - sq) / a, (-b + sq) / a]
        .into_iter()
        .filter(|&t| t > EPS)
        .find(|&t| {
            let z = origin.z + t * dir.z;
            z >= z0 && z <= z1
        })
}

fn ray_disk(origin: &Vec3, dir: &Vec3, axis: (f64, f64), radius: f64, z: f64) -> Option<f64> {
    if dir.z == 0.0 {
        return None;
    }
    let t = (z - origin.z) / dir.z;
    if t <= EPS {
        return None;
    }
    let (px, py) = (origin.x + t * dir.x - axis.0, origin.y + t * dir.y - axis.1);
    (px * px + py * py <= radius * radius).then_some(t)
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Primitive {
    /// Ray parameter of the first hit in front of `origin`. `dir` need not be unit length.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        match *self {
            Primitive::Sphere { center, radius } => ray_sphere(origin, dir, &v(center), radius),
            Primitive::Ellipsoid { center, radii, yaw } => {
                let (o, d) = to_local(origin, dir, &v(center), yaw);
                let inv = Vec3::new(1.0 / radii[0], 1.0 / radii[1], 1.0 / radii[2]);
                let o = o.component_mul(&inv);
                let d = d.component_mul(&inv);
                smallest_positive_root(d.dot(&d), o.dot(&d), o.dot(&o) - 1.0)
            }
            Primitive::Cylinder {
                base,
                radius,
                height,
            } => {
                let axis = (base[0], base[1]);
                let (z0, z1) = (base[2], base[2] + height);
                let side = ray_cylinder_side(origin, dir, axis, radius, z0, z1);
                let caps = min_opt(
                    ray_disk(origin, dir, axis, radius, z0),
                    ray_disk(origin, dir, axis, radius, z1),
                );
                min_opt(side, caps)
            }
            Primitive::Capsule {
                base,
                radius,
                height,
            } => {
                let axis = (base[0], base[1]);
                let (z0, z1) = (base[2], base[2] + height);
                let side = ray_cylinder_side(origin, dir, axis, radius, z0, z1);
                let bottom = ray_sphere(origin, dir, &v(base), radius);
                let top = ray_sphere(origin, dir, &Vec3::new(base[0], base[1], z1), radius);
                min_opt(side, min_opt(bottom, top))
            }
            Primitive::OrientedBox {
                center,
                half_extents,
                yaw,
            } => {
                let (o, d) = to_local(origin, dir, &v(center), yaw);
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for k in 0..3 {
                    let h = half_extents[k];
                    if d[k] == 0.0 {
                        if o[k].abs() > h {
                            return None;
                        }
                        continue;
                    }
                    let (mut t0, mut t1) = ((-h - o[k]) / d[k], (h - o[k]) / d[k]);
                    if t0 > t1 {
                        std::mem::swap(&mut t0, &mut t1);
                    }
                    t_near = t_near.max(t0);
                    t_far = t_far.min(t1);
                }
                if t_near > t_far {
                    return None;
                }
                if t_near > EPS {
                    Some(t_near)
                } else {
                    (t_far > EPS).then_some(t_far)
                }
            }
        }
    }

    /// Sphere enclosing the primitive.
    pub fn bounding_sphere(&self) -> (Vec3, f64) {
        match *self {
            Primitive::Sphere { center, radius } => (v(center), radius),
            Primitive::Ellipsoid { center, radii, .. } => {
                (v(center), radii.iter().copied().fold(0.0, f64::max))
            }
            Primitive::Cylinder {
                base,
                radius,
                height,
            } => (
                Vec3::new(base[0], base[1], base[2] + height / 2.0),
                radius.hypot(height / 2.0),
            ),
            Primitive::Capsule {
                base,
                radius,
                height,
            } => (
                Vec3::new(base[0], base[1], base[2] + height / 2.0),
                radius + height / 2.0,
            ),
            Primitive::OrientedBox {
                center,
                half_extents,
                ..
            } => (v(center), v(half_extents).norm()),
        }
    }

    /// Reflection across the plane y = 0.
    pub fn mirrored(&self) -> Self {
        let m = |p: [f64; 3]| [p[0], -p[1], p[2]];
        match *self {
            Primitive::Sphere { center, radius } => Primitive::Sphere {
                center: m(center),
                radius,
            },
            Primitive::Ellipsoid { center, radii, yaw } => Primitive::Ellipsoid {
                center: m(center),
                radii,
                yaw: -yaw,
            },
            Primitive::Cylinder {
                base,
                radius,
                height,
            } => Primitive::Cylinder {
                base: m(base),
                radius,
                height,
            },
            Primitive::Capsule {
                base,
                radius,
                height,
            } => Primitive::Capsule {
                base: m(base),
                radius,
                height,
            },
            Primitive::OrientedBox {
                center,
                half_extents,
                yaw,
            } => Primitive::OrientedBox {
                center: m(center),
                half_extents,
                yaw: -yaw,
            },
        }
    }
}
