//! Oriented-box overlap tests on the plane.

use crate::geometry::{box_corners, PlanPose, Vec2};

/// Oriented rectangle described by its four corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub corners: [Vec2; 4],
}

impl Obb {
    pub fn from_pose(pose: &PlanPose, length_m: f64, width_m: f64) -> Obb {
        Obb { corners: box_corners(pose, length_m, width_m) }
    }

    /// The two distinct edge directions of the rectangle.
    fn axes(&self) -> [Vec2; 2] {
        let e0 = self.corners[1] - self.corners[0];
        let e1 = self.corners[3] - self.corners[0];
        [e0, e1]
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in self.corners {
            let v = c.dot(axis);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Euclidean distance from a point to the rectangle, zero inside.
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let rel = p - self.corners[0];
        let mut d2 = 0.0;
        for e in self.axes() {
            let len = e.norm();
            let t = rel.dot(e) / len;
            let over = if t < 0.0 {
                -t
            } else if t > len {
                t - len
            } else {
                0.0
            };
            d2 += over * over;
        }
        d2.sqrt()
    }
}

/// Separating-axis overlap test. Touching boundaries count as overlap:
/// separation requires a strictly positive gap on some axis.
pub fn obb_overlap(a: &Obb, b: &Obb) -> bool {
    for axis in a.axes().into_iter().chain(b.axes()) {
        let (a_lo, a_hi) = a.project(axis);
        let (b_lo, b_hi) = b.project(axis);
        if a_hi < b_lo || b_hi < a_lo {
            return false;
        }
    }
    true
}
