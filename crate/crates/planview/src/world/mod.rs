//! Kinematic traffic world: an ego vehicle on a bicycle model, scripted
//! route followers and crosswalk walkers, ego collision bookkeeping, and
//! stuck-recovery teleports.

pub mod collision;
pub mod expert;
pub mod network;
pub mod scenario;

use crate::geometry::{angle_diff, heading, wrap_angle, BoxDims, Frame, ObjectClass, PlanPose, Vec2};
use collision::{obb_overlap, Obb};
use network::RoadNetwork;
use scenario::ScenarioId;
use std::collections::{BTreeSet, VecDeque};

/// Actor id reserved for the ego vehicle.
pub const EGO_ID: u32 = 0;

/// Fixed simulation constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Simulation rate in frames per second.
    pub fps: u32,
    /// Bicycle-model wheelbase in meters.
    pub wheelbase_m: f64,
    /// Full-lock front wheel angle in degrees.
    pub max_steer_deg: f64,
    /// Hard speed cap in meters per second.
    pub max_speed_mps: f64,
    /// Longitudinal acceleration per unit throttle.
    pub throttle_gain: f64,
    /// Longitudinal deceleration per unit brake.
    pub brake_gain: f64,
    /// Speed-proportional drag deceleration.
    pub drag_coeff: f64,
    /// Target headway for scripted vehicles, in seconds.
    pub npc_headway_s: f64,
    /// Scripted-vehicle acceleration cap.
    pub npc_accel_cap: f64,
    /// Scripted-vehicle braking cap.
    pub npc_decel_cap: f64,
    /// Center-to-center gap below which scripted vehicles stop.
    pub npc_stop_gap_m: f64,
    /// Fraction of the braking cap assumed when planning to stop.
    pub npc_brake_margin: f64,
    /// Seconds a yielding driver waits before forcing its way through.
    pub junction_wait_timeout_s: f64,
    /// Trailing window for stuck detection, in seconds.
    pub stuck_window_s: f64,
    /// Displacement below which the window counts as stuck.
    pub stuck_displacement_m: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            fps: 12,
            wheelbase_m: 2.7,
            max_steer_deg: 35.0,
            max_speed_mps: 30.0,
            throttle_gain: 4.0,
            brake_gain: 8.0,
            drag_coeff: 0.1,
            npc_headway_s: 1.5,
            npc_accel_cap: 2.0,
            npc_decel_cap: 6.0,
            npc_stop_gap_m: 8.0,
            npc_brake_margin: 0.7,
            junction_wait_timeout_s: 10.0,
            stuck_window_s: 30.0,
            stuck_displacement_m: 1.0,
        }
    }
}

impl SimParams {
    pub fn dt(&self) -> f64 {
        1.0 / self.fps as f64
    }
}

/// Clamped low-level ego command.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EgoControl {
    throttle: f64,
    brake: f64,
    steer: f64,
}

impl EgoControl {
    /// Builds a command, clamping throttle and brake to `[0, 1]` and steer
    /// to `[-1, 1]`. Positive steer turns right.
    pub fn new(throttle: f64, brake: f64, steer: f64) -> EgoControl {
        EgoControl {
            throttle: throttle.clamp(0.0, 1.0),
            brake: brake.clamp(0.0, 1.0),
            steer: steer.clamp(-1.0, 1.0),
        }
    }

    pub fn throttle(&self) -> f64 {
        self.throttle
    }

    pub fn brake(&self) -> f64 {
        self.brake
    }

    pub fn steer(&self) -> f64 {
        self.steer
    }
}

/// How a scripted actor moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActorKind {
    /// Follows a network route at its speed limits.
    RouteVehicle { route: usize, s: f64 },
    /// Ping-pongs along a crosswalk.
    Walker { crosswalk: usize, s: f64, dir: f64 },
}

/// A scripted traffic participant.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub id: u32,
    pub class: ObjectClass,
    pub pose: PlanPose,
    pub speed_mps: f64,
    pub dims: BoxDims,
    pub kind: ActorKind,
    pub(crate) wait_s: f64,
}

/// The controlled vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoState {
    pub pose: PlanPose,
    pub speed_mps: f64,
    pub yaw_rate: f64,
    pub dims: BoxDims,
    /// Index of the route the ego is assigned to follow.
    pub route: usize,
}

/// Full mutable simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub params: SimParams,
    pub scenario: ScenarioId,
    pub network: RoadNetwork,
    pub ego: EgoState,
    pub actors: Vec<Actor>,
    pub frame_index: u64,
    /// Ego-actor pairs currently in contact, for edge-triggered counting.
    pub contacts: BTreeSet<(u32, u32)>,
    /// Axis-aligned world bounds the ego is clamped into.
    pub bounds: (Vec2, Vec2),
}

#[derive(Clone, Copy)]
struct Snapshot {
    id: u32,
    class: ObjectClass,
    pos: Vec2,
    yaw: f64,
    dims: BoxDims,
}

impl Snapshot {
    fn body(&self) -> Obb {
        let pose = PlanPose::new(self.pos.x, self.pos.y, self.yaw, Frame::World);
        Obb::from_pose(&pose, self.dims.length_m, self.dims.width_m)
    }
}

impl WorldState {
    pub fn clock_s(&self) -> f64 {
        self.frame_index as f64 / self.params.fps as f64
    }

    pub fn ego_obb(&self) -> Obb {
        Obb::from_pose(&self.ego.pose, self.ego.dims.length_m, self.ego.dims.width_m)
    }

    /// Advances one frame. Scripted actors decide against the state as it
    /// was when the frame began, then everyone moves.
    pub fn step(&mut self, control: &EgoControl) {
        let dt = self.params.dt();
        let snapshot: Vec<Snapshot> = std::iter::once(Snapshot {
            id: EGO_ID,
            class: ObjectClass::Vehicle,
            pos: self.ego.pose.position(),
            yaw: self.ego.pose.yaw_rad,
            dims: self.ego.dims,
        })
        .chain(self.actors.iter().map(|a| Snapshot {
            id: a.id,
            class: a.class,
            pos: a.pose.position(),
            yaw: a.pose.yaw_rad,
            dims: a.dims,
        }))
        .collect();

        self.step_ego(control, dt);
        for i in 0..self.actors.len() {
            self.step_actor(i, &snapshot, dt);
        }
        self.frame_index += 1;
    }

    fn step_ego(&mut self, control: &EgoControl, dt: f64) {
        let p = &self.params;
        let accel = p.throttle_gain * control.throttle
            - p.brake_gain * control.brake
            - p.drag_coeff * self.ego.speed_mps;
        let speed = (self.ego.speed_mps + accel * dt).clamp(0.0, p.max_speed_mps);
        let steer_rad = (control.steer * p.max_steer_deg).to_radians();
        let yaw_rate = -(speed / p.wheelbase_m) * steer_rad.tan();
        let yaw = wrap_angle(self.ego.pose.yaw_rad + yaw_rate * dt);
        let mut pos = self.ego.pose.position() + heading(yaw) * (speed * dt);
        pos.x = pos.x.clamp(self.bounds.0.x, self.bounds.1.x);
        pos.y = pos.y.clamp(self.bounds.0.y, self.bounds.1.y);
        self.ego.pose = PlanPose::new(pos.x, pos.y, yaw, Frame::World);
        self.ego.speed_mps = speed;
        self.ego.yaw_rate = yaw_rate;
    }

    fn step_actor(&mut self, i: usize, snapshot: &[Snapshot], dt: f64) {
        match self.actors[i].kind {
            ActorKind::RouteVehicle { route, s } => self.step_route_vehicle(i, route, s, snapshot, dt),
            ActorKind::Walker { crosswalk, s, dir } => self.step_walker(i, crosswalk, s, dir, dt),
        }
    }

    fn step_route_vehicle(&mut self, i: usize, route_idx: usize, s: f64, snapshot: &[Snapshot], dt: f64) {
        let p = self.params;
        let route = &self.network.routes[route_idx];
        let me = &self.actors[i];
        let pos = me.pose.position();
        let yaw = me.pose.yaw_rad;
        let speed = me.speed_mps;
        let (_, _, limit) = route.pose_at(s);
        let mut target = limit;

        let fwd_dir = heading(yaw);
        let lat_dir = fwd_dir.perp();
        // See far enough ahead to come to a rest from the current speed at
        // the planning deceleration, with margin.
        let planning_decel = p.npc_decel_cap * p.npc_brake_margin;
        let lookahead =
            (2.0 * speed + 8.0).max(speed * speed / (2.0 * planning_decel) + 12.0);
        // Points along this vehicle's own path ahead; following the route
        // keeps the check exact through turns and merges.
        let path_step = 2.0;
        let path: Vec<(Vec2, f64)> = (1..=(lookahead / path_step).ceil() as usize)
            .map(|k| {
                let (q, _, lim) = route.pose_at(s + k as f64 * path_step);
                (q, lim)
            })
            .collect();
        // Brake ahead of lower limits so turns are entered at turn speed,
        // not flown into at cruise.
        for (k, (_, lim)) in path.iter().enumerate() {
            let d = (k + 1) as f64 * path_step;
            target = target.min((lim * lim + 2.0 * planning_decel * d).sqrt());
        }
        for o in snapshot.iter().filter(|o| o.id != me.id) {
            let rel = o.pos - pos;
            // Straight corridor directly ahead of the bumper.
            let fwd = rel.dot(fwd_dir);
            if fwd > 0.0 && fwd <= lookahead && rel.dot(lat_dir).abs() <= 1.5 {
                // Pedestrians, co-heading traffic, and head-on blockers all
                // matter; crossing traffic is handled by the junction rule.
                let gap = circular_abs(o.yaw, yaw);
                let matters = match o.class {
                    ObjectClass::Pedestrian => true,
                    ObjectClass::Vehicle => {
                        gap <= 60f64.to_radians() || gap >= 120f64.to_radians()
                    }
                };
                if matters {
                    target = target.min(gap_speed(fwd, &p));
                }
            }
            // Path following: brake for anything whose body sits close to
            // the path ahead. Checking the body rather than the center
            // keeps a rotated straddler visible while leaving on-center
            // oncoming traffic, one lane over, alone.
            let clearance = match o.class {
                ObjectClass::Pedestrian => 1.8,
                ObjectClass::Vehicle => 1.75,
            };
            let body = o.body();
            for (k, (q, _)) in path.iter().enumerate() {
                if (o.pos - *q).norm() <= 5.0 && body.distance_to_point(*q) <= clearance {
                    target = target.min(gap_speed((k + 1) as f64 * path_step, &p));
                    break;
                }
            }
        }

        let mut yield_active = false;
        // The yield window grows with speed so the vehicle can actually
        // come to rest before the junction box.
        let yield_window = 10f64.max(speed * speed / (2.0 * planning_decel));
        for (_, j) in route.entries_within(s, yield_window) {
            let junction = self.network.junctions[j];
            if (pos - junction.center).norm() <= junction.radius_m {
                continue;
            }
            let occupied = snapshot.iter().any(|o| {
                o.id != me.id && o.class == ObjectClass::Vehicle && junction.claimed_by(o.pos)
            });
            if occupied {
                yield_active = true;
            }
        }
        let me = &mut self.actors[i];
        if yield_active {
            if me.wait_s <= p.junction_wait_timeout_s {
                target = 0.0;
            }
            me.wait_s += dt;
        } else {
            me.wait_s = 0.0;
        }

        let dv = (target - speed).clamp(-p.npc_decel_cap * dt, p.npc_accel_cap * dt);
        let new_speed = (speed + dv).max(0.0);
        let new_s = (s + new_speed * dt).rem_euclid(route.total_len());
        let (np, nyaw, _) = self.network.routes[route_idx].pose_at(new_s);
        let me = &mut self.actors[i];
        me.speed_mps = new_speed;
        me.pose = PlanPose::new(np.x, np.y, nyaw, Frame::World);
        me.kind = ActorKind::RouteVehicle { route: route_idx, s: new_s };
    }

    fn step_walker(&mut self, i: usize, crosswalk: usize, s: f64, dir: f64, dt: f64) {
        let walk = self.network.crosswalks[crosswalk];
        // A walker holds its step rather than phasing through a vehicle
        // that blocks the crossing.
        let me = &self.actors[i];
        let ahead = me.pose.position() + heading(me.pose.yaw_rad) * (me.speed_mps * dt + 1.0);
        let probe = Obb::from_pose(
            &PlanPose::new(ahead.x, ahead.y, me.pose.yaw_rad, Frame::World),
            me.dims.length_m,
            me.dims.width_m,
        );
        let blocked = obb_overlap(&probe, &self.ego_obb())
            || self.actors.iter().any(|a| {
                a.class == ObjectClass::Vehicle
                    && obb_overlap(&probe, &Obb::from_pose(&a.pose, a.dims.length_m, a.dims.width_m))
            });
        if blocked {
            return;
        }
        let len = walk.length();
        let mut new_s = s + self.actors[i].speed_mps * dir * dt;
        let mut new_dir = dir;
        if new_s > len {
            new_s = 2.0 * len - new_s;
            new_dir = -1.0;
        } else if new_s < 0.0 {
            new_s = -new_s;
            new_dir = 1.0;
        }
        let pos = walk.point_at(new_s);
        let me = &mut self.actors[i];
        me.pose = PlanPose::new(pos.x, pos.y, walk.travel_yaw(new_dir), Frame::World);
        me.kind = ActorKind::Walker { crosswalk, s: new_s, dir: new_dir };
    }

    /// Edge-triggered ego collision check: returns ids of actors whose
    /// boxes started touching the ego box since the last call.
    pub fn detect_collisions(&mut self) -> Vec<u32> {
        let ego_box = self.ego_obb();
        let mut fresh = Vec::new();
        for a in &self.actors {
            let hit =
                obb_overlap(&ego_box, &Obb::from_pose(&a.pose, a.dims.length_m, a.dims.width_m));
            let key = (EGO_ID, a.id);
            if hit {
                if self.contacts.insert(key) {
                    fresh.push(a.id);
                }
            } else {
                self.contacts.remove(&key);
            }
        }
        fresh
    }

    /// Teleports the stuck ego to the next clear waypoint on its route:
    /// the first of up to eight points spaced 10 m ahead with no actor
    /// within 8 m, or the farthest one if none is clear. Speed resets to
    /// zero and open ego contacts are forgotten.
    pub fn intervene(&mut self) -> PlanPose {
        let route = &self.network.routes[self.ego.route];
        let s0 = route.project(self.ego.pose.position());
        let mut chosen = None;
        for k in 1..=8 {
            let s = s0 + 10.0 * k as f64;
            let (p, yaw, _) = route.pose_at(s);
            if self.actors.iter().all(|a| (a.pose.position() - p).norm() >= 8.0) {
                chosen = Some((p, yaw));
                break;
            }
        }
        let (p, yaw) = chosen.unwrap_or_else(|| {
            let (p, yaw, _) = route.pose_at(s0 + 80.0);
            (p, yaw)
        });
        self.ego.pose = PlanPose::new(p.x, p.y, yaw, Frame::World);
        self.ego.speed_mps = 0.0;
        self.ego.yaw_rate = 0.0;
        self.contacts.retain(|key| key.0 != EGO_ID);
        self.ego.pose
    }
}

fn circular_abs(a: f64, b: f64) -> f64 {
    angle_diff(a, b).abs()
}

/// Scripted-vehicle speed target for a given forward gap: stop inside the
/// minimum gap, creep at a fixed time headway when close, and never
/// exceed the speed from which the planning deceleration can stop within
/// the remaining margin.
fn gap_speed(gap: f64, p: &SimParams) -> f64 {
    let margin = gap - p.npc_stop_gap_m;
    if margin < 0.0 {
        return 0.0;
    }
    let headway_speed = margin / p.npc_headway_s;
    let braking_speed = (2.0 * p.npc_decel_cap * p.npc_brake_margin * margin).sqrt();
    headway_speed.min(braking_speed)
}

/// Detects a stalled ego: fires when the position a full window ago is
/// within the displacement threshold of the current one.
#[derive(Debug, Clone)]
pub struct StuckMonitor {
    window_frames: u64,
    threshold_m: f64,
    samples: VecDeque<(u64, Vec2)>,
}

impl StuckMonitor {
    pub fn new(params: &SimParams) -> StuckMonitor {
        StuckMonitor {
            window_frames: (params.stuck_window_s * params.fps as f64).round() as u64,
            threshold_m: params.stuck_displacement_m,
            samples: VecDeque::new(),
        }
    }

    /// Records the ego position for a frame and reports whether the ego
    /// has been stuck for exactly the trailing window.
    pub fn observe(&mut self, frame: u64, pos: Vec2) -> bool {
        self.samples.push_back((frame, pos));
        while let Some(&(f, _)) = self.samples.front() {
            if f + self.window_frames < frame {
                self.samples.pop_front();
            } else {
                break;
            }
        }
        match self.samples.front() {
            Some(&(f, old)) if f + self.window_frames == frame => {
                (pos - old).norm() < self.threshold_m
            }
            _ => false,
        }
    }

    /// Restarts the window from a fresh position, as after a teleport.
    pub fn reset(&mut self, frame: u64, pos: Vec2) {
        self.samples.clear();
        self.samples.push_back((frame, pos));
    }
}

#[cfg(test)]
mod tests {
    use super::scenario::make_scenario;
    use super::*;
    use approx::assert_relative_eq;

    fn coast() -> EgoControl {
        EgoControl::default()
    }

    #[test]
    fn control_inputs_are_clamped() {
        let c = EgoControl::new(2.0, -1.0, -7.0);
        assert_eq!(c.throttle(), 1.0);
        assert_eq!(c.brake(), 0.0);
        assert_eq!(c.steer(), -1.0);
    }

    #[test]
    fn full_throttle_from_rest_matches_closed_form() {
        let mut w = make_scenario("highway-0".parse().unwrap(), 1);
        w.ego.speed_mps = 0.0;
        let start = w.ego.pose.position();
        let yaw = w.ego.pose.yaw_rad;
        w.step(&EgoControl::new(1.0, 0.0, 0.0));
        // dv = (4*1 - 0.1*0) / 12
        assert_relative_eq!(w.ego.speed_mps, 4.0 / 12.0, epsilon = 1e-12);
        // position integrates the updated speed along an unchanged heading
        let moved = w.ego.pose.position() - start;
        let expected = heading(yaw) * (4.0 / 12.0 / 12.0);
        assert_relative_eq!(moved.x, expected.x, epsilon = 1e-12);
        assert_relative_eq!(moved.y, expected.y, epsilon = 1e-12);
        assert_eq!(w.frame_index, 1);
    }

    #[test]
    fn top_speed_saturates_at_cap() {
        let mut w = make_scenario("highway-0".parse().unwrap(), 1);
        w.actors.clear();
        for _ in 0..1200 {
            w.step(&EgoControl::new(1.0, 0.0, 0.0));
        }
        // drag equilibrium 4/0.1 = 40 exceeds the hard cap
        assert_eq!(w.ego.speed_mps, 30.0);
    }

    #[test]
    fn steering_right_turns_clockwise_at_fixed_radius() {
        let mut w = make_scenario("highway-0".parse().unwrap(), 1);
        w.actors.clear();
        w.ego.speed_mps = 10.0;
        // throttle 0.25 balances drag exactly at 10 m/s
        w.step(&EgoControl::new(0.25, 0.0, 1.0));
        assert_relative_eq!(w.ego.speed_mps, 10.0, epsilon = 1e-12);
        let expected_rate = -(10.0 / 2.7) * 35f64.to_radians().tan();
        assert_relative_eq!(w.ego.yaw_rate, expected_rate, epsilon = 1e-12);
        assert!(w.ego.yaw_rate < 0.0);
    }

    #[test]
    fn ego_is_clamped_to_world_bounds() {
        let mut w = make_scenario("highway-0".parse().unwrap(), 1);
        w.actors.clear();
        w.ego.pose = PlanPose::new(59.0, 500.0, 3.0 * std::f64::consts::FRAC_PI_2, Frame::World);
        for _ in 0..120 {
            w.step(&EgoControl::new(1.0, 0.0, 0.0));
        }
        assert_eq!(w.ego.pose.position().x, 60.0);
    }

    #[test]
    fn stuck_monitor_fires_at_exact_window() {
        let params = SimParams::default();
        let mut m = StuckMonitor::new(&params);
        let p = Vec2::new(3.0, 4.0);
        for f in 0..360 {
            assert!(!m.observe(f, p), "fired early at frame {f}");
        }
        assert!(m.observe(360, p));
        m.reset(360, Vec2::new(50.0, 60.0));
        for f in 361..720 {
            assert!(!m.observe(f, Vec2::new(50.0, 60.0)));
        }
        assert!(m.observe(720, Vec2::new(50.0, 60.0)));
    }

    #[test]
    fn stuck_monitor_ignores_moving_ego() {
        let params = SimParams::default();
        let mut m = StuckMonitor::new(&params);
        for f in 0..=1000 {
            let pos = Vec2::new(f as f64 * 0.01, 0.0);
            assert!(!m.observe(f, pos));
        }
    }

    #[test]
    fn collisions_are_edge_triggered() {
        let mut w = make_scenario("highway-0".parse().unwrap(), 1);
        w.actors.truncate(1);
        let a = w.actors[0].pose;
        w.ego.pose = PlanPose::new(a.x_m + 1.0, a.y_m, a.yaw_rad, Frame::World);
        assert_eq!(w.detect_collisions(), vec![w.actors[0].id]);
        assert!(w.detect_collisions().is_empty(), "still touching, no new event");
        w.ego.pose = PlanPose::new(a.x_m + 50.0, a.y_m, a.yaw_rad, Frame::World);
        assert!(w.detect_collisions().is_empty());
        w.ego.pose = PlanPose::new(a.x_m - 1.0, a.y_m, a.yaw_rad, Frame::World);
        assert_eq!(w.detect_collisions(), vec![w.actors[0].id]);
    }

    #[test]
    fn intervention_moves_ego_forward_to_clear_ground() {
        let mut w = make_scenario("urban-0".parse().unwrap(), 9);
        let before = w.ego.pose.position();
        let route = &w.network.routes[w.ego.route];
        let s_before = route.project(before);
        let after = w.intervene();
        let s_after = w.network.routes[w.ego.route].project(after.position());
        let advanced = w.network.routes[w.ego.route].dist_along(s_before, s_after);
        assert!(advanced >= 9.9, "moved {advanced} m along the route");
        assert!(advanced <= 80.1);
        assert_eq!(w.ego.speed_mps, 0.0);
        for a in &w.actors {
            assert!((a.pose.position() - after.position()).norm() >= 8.0);
        }
    }

    #[test]
    fn npc_queues_behind_stopped_leader() {
        let mut w = make_scenario("highway-0".parse().unwrap(), 2);
        // keep exactly one scripted vehicle and park the ego on its lane,
        // far ahead, as a roadblock
        w.actors.truncate(1);
        let ActorKind::RouteVehicle { route, s } = w.actors[0].kind else { unreachable!() };
        let r = &w.network.routes[route];
        let s_block = (s + 120.0).rem_euclid(r.total_len());
        let (bp, byaw, _) = r.pose_at(s_block);
        w.ego.pose = PlanPose::new(bp.x, bp.y, byaw, Frame::World);
        w.ego.speed_mps = 0.0;
        let mut min_center_gap = f64::INFINITY;
        for _ in 0..(12 * 60) {
            w.step(&coast());
            let gap = (w.actors[0].pose.position() - w.ego.pose.position()).norm();
            min_center_gap = min_center_gap.min(gap);
        }
        assert!(w.actors[0].speed_mps < 0.2, "follower kept speed {}", w.actors[0].speed_mps);
        assert!(min_center_gap >= 5.0, "follower closed to {min_center_gap} m");
        assert!(min_center_gap <= 12.0, "follower never approached ({min_center_gap} m)");
    }

    #[test]
    fn npcs_track_their_routes_without_collisions() {
        for name in ["highway-1", "urban-3"] {
            let mut w = make_scenario(name.parse().unwrap(), 11);
            // move the ego far away so only scripted traffic interacts
            w.ego.pose = PlanPose::new(-55.0, -55.0, 0.0, Frame::World);
            w.ego.speed_mps = 0.0;
            for _ in 0..(12 * 40) {
                w.step(&coast());
            }
            for a in w.actors.iter().filter(|a| a.class == ObjectClass::Vehicle) {
                let ActorKind::RouteVehicle { route, s } = a.kind else { unreachable!() };
                let (p, _, _) = w.network.routes[route].pose_at(s);
                assert!((p - a.pose.position()).norm() < 1e-9, "{name}: actor off route");
            }
            let vehicles: Vec<&Actor> =
                w.actors.iter().filter(|a| a.class == ObjectClass::Vehicle).collect();
            for i in 0..vehicles.len() {
                for j in (i + 1)..vehicles.len() {
                    let (a, b) = (vehicles[i], vehicles[j]);
                    let oa = Obb::from_pose(&a.pose, a.dims.length_m, a.dims.width_m);
                    let ob = Obb::from_pose(&b.pose, b.dims.length_m, b.dims.width_m);
                    assert!(
                        !obb_overlap(&oa, &ob),
                        "{name}: vehicles {} and {} overlap",
                        a.id,
                        b.id
                    );
                }
            }
        }
    }

    #[test]
    fn stepping_is_deterministic() {
        let mut a = make_scenario("urban-4".parse().unwrap(), 77);
        let mut b = make_scenario("urban-4".parse().unwrap(), 77);
        let control = EgoControl::new(0.6, 0.0, 0.1);
        for _ in 0..240 {
            a.step(&control);
            b.step(&control);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn walkers_stay_on_their_crosswalk() {
        let mut w = make_scenario("urban-0".parse().unwrap(), 4);
        w.ego.pose = PlanPose::new(-55.0, -55.0, 0.0, Frame::World);
        for _ in 0..(12 * 30) {
            w.step(&coast());
        }
        for a in w.actors.iter().filter(|a| a.class == ObjectClass::Pedestrian) {
            let ActorKind::Walker { crosswalk, s, .. } = a.kind else { unreachable!() };
            let walk = w.network.crosswalks[crosswalk];
            assert!(s >= 0.0 && s <= walk.length());
            assert!((a.pose.position() - walk.point_at(s)).norm() < 1e-9);
        }
    }
}
