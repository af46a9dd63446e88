//! Ground-truth route-following driver used as the imitation target. It
//! reads true world state rather than sensed estimates.

use super::collision::{obb_overlap, Obb};
use super::WorldState;
use crate::geometry::{angle_diff, heading, wrap_angle, Frame, ObjectClass, PlanPose};
use crate::policy::{Action, LatAction, LonAction};

/// Pure-pursuit lookahead distance along the route. Short enough that the
/// steering deadband tolerates only about a meter of lateral drift, which
/// keeps the driver clear of the oncoming lane.
const LOOKAHEAD_M: f64 = 6.0;
/// Heading error beyond which the driver commits to a turn.
const TURN_ERR_RAD: f64 = 10.0 * std::f64::consts::PI / 180.0;
/// Minimum corridor length that forces a stop when any actor box intrudes.
const STOP_CORRIDOR_M: f64 = 12.0;
/// Minimum corridor length that forces a slowdown.
const SLOW_CORRIDOR_M: f64 = 25.0;
/// Corridor width for both checks.
const CORRIDOR_WIDTH_M: f64 = 3.0;
/// Emergency deceleration assumed when scaling the stop corridor.
const STOP_DECEL: f64 = 8.0;
/// Comfortable deceleration assumed when scaling the slow corridor and
/// the turn approach.
const SLOW_DECEL: f64 = 3.5;
/// Length of each box in the route-following corridor chain.
const SEGMENT_M: f64 = 8.0;
/// Minimum route distance to an upcoming turn that forces a slowdown.
const TURN_SLOW_M: f64 = 25.0;
/// Route distance to a junction entry below which the driver slows.
const JUNCTION_SLOW_M: f64 = 12.0;
/// Margin added around pedestrian boxes in the corridor checks, so a
/// walker about to step into the path is caught a decision early.
const PED_MARGIN_M: f64 = 1.0;
/// Extra stop-corridor length for pedestrians. Walkers never brake, so
/// the driver halts farther back and keeps the crossing clear.
const PED_STOP_EXTRA_M: f64 = 8.0;
/// Route distance to a crosswalk below which the driver slows.
const WALK_SLOW_M: f64 = 20.0;
/// Consecutive straight decisions required before cruising fast again.
/// Holding back one decision after a correction lets the heading settle
/// instead of feeding the next swing with speed.
const ALIGNED_SETTLED: u32 = 2;
/// Speed above which a held full-steer correction swings the heading
/// further than the deadband, so the weave never settles on its own.
const SETTLE_SPEED_MPS: f64 = 4.5;
/// Comfortable deceleration used to scale the yield trigger with speed.
const YIELD_DECEL: f64 = 6.0;
/// Minimum distance-to-entry at which junction yielding engages.
const YIELD_MIN_M: f64 = 10.0;
/// How long the driver yields before forcing its way through.
const YIELD_TIMEOUT_S: f64 = 10.0;

/// Stateful expert: tracks how long it has been yielding at a junction
/// and whether its heading has settled after the last correction.
#[derive(Debug, Clone)]
pub struct ExpertDriver {
    yield_since: Option<f64>,
    aligned_streak: u32,
}

impl Default for ExpertDriver {
    fn default() -> ExpertDriver {
        ExpertDriver { yield_since: None, aligned_streak: ALIGNED_SETTLED }
    }
}

impl ExpertDriver {
    pub fn new() -> ExpertDriver {
        ExpertDriver::default()
    }

    /// Chooses the next action from ground truth: pure pursuit for the
    /// lateral intent; corridors, upcoming turns, and junction yielding
    /// for the longitudinal one.
    pub fn action(&mut self, world: &WorldState) -> Action {
        let ego = &world.ego;
        let route = &world.network.routes[ego.route];
        let pos = ego.pose.position();
        let s0 = route.project(pos);

        let (target, _, _) = route.pose_at(s0 + LOOKAHEAD_M);
        let to_target = target - pos;
        let desired_yaw = wrap_angle((-to_target.x).atan2(to_target.y));
        let err = angle_diff(desired_yaw, ego.pose.yaw_rad);
        let lat = if err > TURN_ERR_RAD {
            LatAction::Left
        } else if err < -TURN_ERR_RAD {
            LatAction::Right
        } else {
            LatAction::Straight
        };
        self.aligned_streak =
            if lat == LatAction::Straight { self.aligned_streak.saturating_add(1) } else { 0 };

        // Corridors grow with the braking distance at the current speed,
        // so the driver reacts early enough at highway pace while staying
        // tight (and passable) in slow urban traffic.
        let speed = ego.speed_mps;
        let stop_len = STOP_CORRIDOR_M.max(speed * speed / (2.0 * STOP_DECEL) + 6.0);
        let slow_len = SLOW_CORRIDOR_M.max(speed * speed / (2.0 * SLOW_DECEL) + 12.0);
        let blocked_close = self.corridor_hit(world, s0, stop_len, ObjectClass::Vehicle)
            || self.corridor_hit(world, s0, stop_len + PED_STOP_EXTRA_M, ObjectClass::Pedestrian);
        let blocked_far = blocked_close
            || self.corridor_hit(world, s0, slow_len, ObjectClass::Vehicle)
            || self.corridor_hit(world, s0, slow_len, ObjectClass::Pedestrian);
        let turn_near =
            route.turn_ahead(s0, TURN_SLOW_M.max(speed * speed / (2.0 * SLOW_DECEL)));
        let junction_near = !route.entries_within(s0, JUNCTION_SLOW_M).is_empty()
            || world.network.junctions.iter().any(|j| (pos - j.center).norm() <= j.radius_m);
        let walk_near = world.network.crosswalks.iter().any(|w| {
            let mid = w.a + (w.b - w.a) * 0.5;
            let sw = route.project(mid);
            let (p, _, _) = route.pose_at(sw);
            (p - mid).norm() <= 3.0 && route.dist_along(s0, sw) <= WALK_SLOW_M
        });

        let trigger = YIELD_MIN_M.max(ego.speed_mps * ego.speed_mps / (2.0 * YIELD_DECEL));
        let mut yielding = false;
        for (_, j) in route.entries_within(s0, trigger) {
            let junction = world.network.junctions[j];
            if (pos - junction.center).norm() <= junction.radius_m {
                continue;
            }
            let occupied = world.actors.iter().any(|a| {
                a.class == ObjectClass::Vehicle && junction.claimed_by(a.pose.position())
            });
            if occupied {
                yielding = true;
            }
        }
        let yield_stop = if yielding {
            let since = *self.yield_since.get_or_insert(world.clock_s());
            world.clock_s() - since <= YIELD_TIMEOUT_S
        } else {
            self.yield_since = None;
            false
        };

        // Hard steering at cruise speed overshoots badly with held controls,
        // so corrections shed speed first and the cruise pace only returns
        // once the heading has settled.
        let correcting_fast = lat != LatAction::Straight && speed > SETTLE_SPEED_MPS;
        let lon = if blocked_close || yield_stop || correcting_fast {
            LonAction::Stop
        } else if blocked_far
            || turn_near
            || junction_near
            || walk_near
            || self.aligned_streak < ALIGNED_SETTLED
        {
            LonAction::Slow
        } else {
            LonAction::Fast
        };
        Action { lat, lon }
    }

    /// True when any actor of `class` intrudes into a corridor of the
    /// given length ahead of the ego front bumper. The first box points
    /// along the ego heading; the rest follow the route so the corridor
    /// bends with the road instead of sweeping the oncoming lane in turns.
    fn corridor_hit(&self, world: &WorldState, s0: f64, length: f64, class: ObjectClass) -> bool {
        let ego = &world.ego;
        let route = &world.network.routes[ego.route];
        let nose = ego.dims.length_m / 2.0;
        let head_len = SEGMENT_M.min(length);
        let center = ego.pose.position() + heading(ego.pose.yaw_rad) * (nose + head_len / 2.0);
        let mut boxes = vec![Obb::from_pose(
            &PlanPose::new(center.x, center.y, ego.pose.yaw_rad, Frame::World),
            head_len,
            CORRIDOR_WIDTH_M,
        )];
        let mut s = head_len;
        while s < length {
            let seg = SEGMENT_M.min(length - s);
            let (p, yaw, _) = route.pose_at(s0 + nose + s + seg / 2.0);
            boxes.push(Obb::from_pose(
                &PlanPose::new(p.x, p.y, yaw, Frame::World),
                seg,
                CORRIDOR_WIDTH_M,
            ));
            s += seg;
        }
        let margin = match class {
            ObjectClass::Pedestrian => PED_MARGIN_M,
            ObjectClass::Vehicle => 0.0,
        };
        world.actors.iter().filter(|a| a.class == class).any(|a| {
            let actor = Obb::from_pose(
                &a.pose,
                a.dims.length_m + 2.0 * margin,
                a.dims.width_m + 2.0 * margin,
            );
            boxes.iter().any(|b| obb_overlap(b, &actor))
        })
    }
}
