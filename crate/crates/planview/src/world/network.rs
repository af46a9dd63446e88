//! Road network primitives: closed polyline routes with speed limits,
//! circular junction regions, and pedestrian crosswalks.

use crate::geometry::{wrap_angle, Vec2};

/// Circular region where crossing routes take turns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Junction {
    pub center: Vec2,
    pub radius_m: f64,
}

impl Junction {
    /// True when a vehicle at `p` counts as occupying this junction for
    /// yield decisions. The pad past the geometric circle covers bodies
    /// still completing a merge just outside it.
    pub fn claimed_by(&self, p: Vec2) -> bool {
        (p - self.center).norm() <= self.radius_m + 2.5
    }
}

/// Straight pedestrian crossing; walkers ping-pong between the endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crosswalk {
    pub a: Vec2,
    pub b: Vec2,
}

impl Crosswalk {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let len = self.length();
        if len <= 0.0 {
            return self.a;
        }
        self.a + (self.b - self.a) * (s / len)
    }

    /// Yaw of travel toward `b` when `dir > 0`, toward `a` otherwise.
    pub fn travel_yaw(&self, dir: f64) -> f64 {
        let d = (self.b - self.a) * dir.signum();
        wrap_angle((-d.x).atan2(d.y))
    }
}

/// A waypoint with the speed limit of the segment that leaves it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutePoint {
    pub pos: Vec2,
    pub speed_mps: f64,
}

/// A closed polyline loop with per-segment speed limits, precomputed
/// junction entry points, and marked turn spans.
///
/// Arc length `s` is measured from the first point and wraps modulo the
/// loop length everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePath {
    points: Vec<RoutePoint>,
    /// `cum_s[i]` is the arc length at `points[i]`; one extra entry holds
    /// the total loop length.
    cum_s: Vec<f64>,
    /// `(s, junction index)` where the route first enters each junction
    /// circle, sorted by `s`.
    junction_entries: Vec<(f64, usize)>,
    /// Arc-length spans `[start, end]` marked as turns.
    turn_spans: Vec<(f64, f64)>,
}

impl RoutePath {
    /// Builds a closed loop. A trailing point that duplicates the first is
    /// dropped. `turn_idx_spans` are inclusive point-index spans; an end
    /// index equal to `points.len()` (after trimming) means the loop seam.
    pub fn new(
        mut points: Vec<RoutePoint>,
        turn_idx_spans: &[(usize, usize)],
        junctions: &[Junction],
    ) -> RoutePath {
        assert!(points.len() >= 3, "a loop needs at least 3 points");
        if (points[points.len() - 1].pos - points[0].pos).norm() < 1e-9 {
            points.pop();
        }
        let n = points.len();
        let mut cum_s = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for i in 0..n {
            cum_s.push(acc);
            let seg = (points[(i + 1) % n].pos - points[i].pos).norm();
            assert!(seg > 1e-9, "degenerate segment at index {i}");
            acc += seg;
        }
        cum_s.push(acc);
        let turn_spans = turn_idx_spans
            .iter()
            .map(|&(a, b)| {
                assert!(a < b && b <= n, "bad turn span ({a}, {b})");
                (cum_s[a], cum_s[b])
            })
            .collect();
        let mut route = RoutePath { points, cum_s, junction_entries: Vec::new(), turn_spans };
        route.junction_entries = route.find_entries(junctions);
        route
    }

    pub fn total_len(&self) -> f64 {
        *self.cum_s.last().unwrap()
    }

    pub fn points(&self) -> &[RoutePoint] {
        &self.points
    }

    /// Position, travel yaw, and speed limit at arc length `s` (wrapped).
    pub fn pose_at(&self, s: f64) -> (Vec2, f64, f64) {
        let total = self.total_len();
        let s = s.rem_euclid(total);
        let n = self.points.len();
        // partition_point returns the first index with cum_s > s; the
        // segment starts one before it.
        let i = self.cum_s.partition_point(|&c| c <= s).saturating_sub(1).min(n - 1);
        let a = self.points[i].pos;
        let b = self.points[(i + 1) % n].pos;
        let seg_len = self.cum_s[i + 1] - self.cum_s[i];
        let t = ((s - self.cum_s[i]) / seg_len).clamp(0.0, 1.0);
        let d = b - a;
        let yaw = wrap_angle((-d.x).atan2(d.y));
        (a + d * t, yaw, self.points[i].speed_mps)
    }

    /// Arc length of the point on the route closest to `p`.
    pub fn project(&self, p: Vec2) -> f64 {
        let n = self.points.len();
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n {
            let a = self.points[i].pos;
            let b = self.points[(i + 1) % n].pos;
            let d = b - a;
            let seg_len2 = d.dot(d);
            let t = ((p - a).dot(d) / seg_len2).clamp(0.0, 1.0);
            let q = a + d * t;
            let dist = (p - q).norm();
            if dist < best.0 {
                best = (dist, self.cum_s[i] + t * seg_len2.sqrt());
            }
        }
        best.1
    }

    /// Forward arc distance from `s_from` to `s_to` around the loop.
    pub fn dist_along(&self, s_from: f64, s_to: f64) -> f64 {
        (s_to - s_from).rem_euclid(self.total_len())
    }

    /// Junction entries within `window` meters ahead of `s`, as
    /// `(distance ahead, junction index)`.
    pub fn entries_within(&self, s: f64, window: f64) -> Vec<(f64, usize)> {
        self.junction_entries
            .iter()
            .filter_map(|&(se, j)| {
                let d = self.dist_along(s, se);
                (d <= window).then_some((d, j))
            })
            .collect()
    }

    /// True when `s` is inside a turn span or within `window` meters of
    /// the start of one.
    pub fn turn_ahead(&self, s: f64, window: f64) -> bool {
        let total = self.total_len();
        self.turn_spans.iter().any(|&(start, end)| {
            let to_start = (start - s).rem_euclid(total);
            let into = (s - start).rem_euclid(total);
            to_start <= window || into <= end - start
        })
    }

    pub fn turn_spans(&self) -> &[(f64, f64)] {
        &self.turn_spans
    }

    pub fn junction_entries(&self) -> &[(f64, usize)] {
        &self.junction_entries
    }

    /// First crossing of each junction circle, from outside to inside,
    /// found by solving each segment-circle intersection.
    fn find_entries(&self, junctions: &[Junction]) -> Vec<(f64, usize)> {
        let n = self.points.len();
        let mut entries = Vec::new();
        for (j, junction) in junctions.iter().enumerate() {
            let mut first: Option<f64> = None;
            for i in 0..n {
                let a = self.points[i].pos;
                let b = self.points[(i + 1) % n].pos;
                if (a - junction.center).norm() <= junction.radius_m {
                    continue; // already inside at segment start
                }
                let d = b - a;
                let f = a - junction.center;
                let qa = d.dot(d);
                let qb = 2.0 * f.dot(d);
                let qc = f.dot(f) - junction.radius_m * junction.radius_m;
                let disc = qb * qb - 4.0 * qa * qc;
                if disc < 0.0 {
                    continue;
                }
                let t = (-qb - disc.sqrt()) / (2.0 * qa);
                if !(0.0..=1.0).contains(&t) {
                    continue;
                }
                let s = self.cum_s[i] + t * qa.sqrt();
                if first.map_or(true, |cur| s < cur) {
                    first = Some(s);
                }
            }
            if let Some(s) = first {
                entries.push((s, j));
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        entries
    }
}

/// Points along a circular arc from angle `a0` to `a1` (standard math
/// angles about `center`), excluding the starting point.
pub fn arc_points(center: Vec2, radius: f64, a0: f64, a1: f64, steps: usize) -> Vec<Vec2> {
    (1..=steps)
        .map(|k| {
            let a = a0 + (a1 - a0) * (k as f64 / steps as f64);
            center + Vec2::new(a.cos(), a.sin()) * radius
        })
        .collect()
}

/// Static scenario geometry: routes, junctions, crosswalks, and the
/// drivable-area quads used for the map channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub routes: Vec<RoutePath>,
    pub junctions: Vec<Junction>,
    pub crosswalks: Vec<Crosswalk>,
    pub map_quads: Vec<[Vec2; 4]>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn square_loop() -> RoutePath {
        let pts = [(0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (0.0, 100.0)]
            .map(|(x, y)| RoutePoint { pos: Vec2::new(x, y), speed_mps: 10.0 });
        RoutePath::new(pts.to_vec(), &[], &[])
    }

    #[test]
    fn cum_lengths_and_wrap() {
        let r = square_loop();
        assert_relative_eq!(r.total_len(), 400.0);
        let (p, yaw, speed) = r.pose_at(50.0);
        assert_relative_eq!(p.x, 50.0);
        assert_relative_eq!(p.y, 0.0);
        // travel direction +X is yaw 3*pi/2 (90 degrees clockwise of +Y)
        assert_relative_eq!(yaw, 3.0 * FRAC_PI_2);
        assert_relative_eq!(speed, 10.0);
        let (p, _, _) = r.pose_at(450.0);
        assert_relative_eq!(p.x, 50.0);
        assert_relative_eq!(p.y, 0.0);
        let (p, _, _) = r.pose_at(-10.0);
        assert_relative_eq!(p.x, 0.0);
        assert_relative_eq!(p.y, 10.0);
    }

    #[test]
    fn project_recovers_arc_length() {
        let r = square_loop();
        for &s in &[0.0, 13.7, 99.0, 150.0, 260.5, 399.0] {
            let (p, _, _) = r.pose_at(s);
            assert_relative_eq!(r.project(p), s, epsilon = 1e-9);
        }
        // off-route point snaps to the nearest edge
        assert_relative_eq!(r.project(Vec2::new(50.0, -5.0)), 50.0, epsilon = 1e-9);
    }

    #[test]
    fn junction_entry_on_straight_route() {
        let pts = vec![
            RoutePoint { pos: Vec2::new(0.0, 0.0), speed_mps: 10.0 },
            RoutePoint { pos: Vec2::new(0.0, 100.0), speed_mps: 10.0 },
            RoutePoint { pos: Vec2::new(-5.0, 50.0), speed_mps: 10.0 },
        ];
        let junctions = [Junction { center: Vec2::new(0.0, 50.0), radius_m: 9.0 }];
        let r = RoutePath::new(pts, &[], &junctions);
        let entries = r.junction_entries();
        assert_eq!(entries.len(), 1);
        assert_relative_eq!(entries[0].0, 41.0, epsilon = 1e-9);
        assert_eq!(entries[0].1, 0);
        assert_eq!(r.entries_within(35.0, 10.0), vec![(6.0, 0)]);
        assert!(r.entries_within(42.0, 10.0).is_empty());
    }

    #[test]
    fn turn_spans_convert_to_arc_length() {
        let pts = [(0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (0.0, 100.0)]
            .map(|(x, y)| RoutePoint { pos: Vec2::new(x, y), speed_mps: 10.0 });
        let r = RoutePath::new(pts.to_vec(), &[(1, 2)], &[]);
        assert_eq!(r.turn_spans(), &[(100.0, 200.0)]);
        assert!(r.turn_ahead(80.0, 25.0));
        assert!(r.turn_ahead(150.0, 25.0));
        assert!(!r.turn_ahead(50.0, 25.0));
        assert!(!r.turn_ahead(210.0, 25.0));
    }

    #[test]
    fn arc_points_follow_circle() {
        let pts = arc_points(Vec2::new(0.0, 0.0), 2.0, 0.0, PI, 8);
        assert_eq!(pts.len(), 8);
        for p in &pts {
            assert_relative_eq!(p.norm(), 2.0, epsilon = 1e-12);
        }
        assert_relative_eq!(pts[7].x, -2.0, epsilon = 1e-12);
        assert_relative_eq!(pts[7].y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trailing_duplicate_point_is_trimmed() {
        let pts = vec![
            RoutePoint { pos: Vec2::new(0.0, 0.0), speed_mps: 5.0 },
            RoutePoint { pos: Vec2::new(10.0, 0.0), speed_mps: 5.0 },
            RoutePoint { pos: Vec2::new(0.0, 10.0), speed_mps: 5.0 },
            RoutePoint { pos: Vec2::new(0.0, 0.0), speed_mps: 5.0 },
        ];
        let r = RoutePath::new(pts, &[], &[]);
        assert_eq!(r.points().len(), 3);
    }

    #[test]
    fn crosswalk_travel_yaw_flips_with_direction() {
        let w = Crosswalk { a: Vec2::new(-4.5, 0.0), b: Vec2::new(4.5, 0.0) };
        assert_relative_eq!(w.travel_yaw(1.0), 3.0 * FRAC_PI_2);
        assert_relative_eq!(w.travel_yaw(-1.0), FRAC_PI_2);
        assert_relative_eq!(w.point_at(4.5).x, 0.0);
    }
}
