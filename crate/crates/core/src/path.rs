//! Planar polylines and nearest-point queries.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    points: Vec<[f64; 2]>,
}

/// Closest point on a polyline to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: [f64; 2],
    pub distance: f64,
    /// Heading of the segment holding the closest point.
    pub tangent: f64,
    /// Arc length from the first vertex to the closest point.
    pub arc_length: f64,
}

impl Polyline {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }

    /// Nearest point by exhaustive segment search. `None` for an empty polyline.
    pub fn project(&self, p: [f64; 2]) -> Option<Projection> {
        match self.points.len() {
            0 => None,
            1 => {
                let q = self.points[0];
                Some(Projection {
                    point: q,
                    distance: (p[0] - q[0]).hypot(p[1] - q[1]),
                    tangent: 0.0,
                    arc_length: 0.0,
                })
            }
            _ => {
                let mut best: Option<Projection> = None;
                let mut walked = 0.0;
                for w in self.points.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                    let len2 = dx * dx + dy * dy;
                    let u = if len2 > 0.0 {
                        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let q = [a[0] + u * dx, a[1] + u * dy];
                    let distance = (p[0] - q[0]).hypot(p[1] - q[1]);
                    let seg_len = len2.sqrt();
                    if best.is_none_or(|b| distance < b.distance) {
                        best = Some(Projection {
                            point: q,
                            distance,
                            tangent: dy.atan2(dx),
                            arc_length: walked + u * seg_len,
                        });
                    }
                    walked += seg_len;
                }
                best
            }
        }
    }
}
