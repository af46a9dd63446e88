//! Built-in scenario catalog: a two-circuit highway and a three-by-three
//! urban grid, each with seeded traffic placement.

use super::network::{arc_points, Crosswalk, Junction, RoadNetwork, RoutePath, RoutePoint};
use super::{Actor, ActorKind, EgoState, SimParams, WorldState};
use crate::geometry::{BoxDims, Frame, ObjectClass, PlanPose, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub const HIGHWAY_VARIANTS: u32 = 2;
pub const URBAN_VARIANTS: u32 = 6;

const HW_SPAN_M: f64 = 1000.0;
const HW_INNER_OFFSET_M: f64 = 10.5;
const HW_OUTER_OFFSET_M: f64 = 14.0;
const HW_STRAIGHT_SPEED: f64 = 25.0;
const HW_TURN_SPEED: f64 = 8.0;
const HW_VEHICLES: usize = 16;

const UR_GRID: [f64; 3] = [0.0, 150.0, 300.0];
const UR_LANE_OFFSET_M: f64 = 1.5;
const UR_JUNCTION_R_M: f64 = 9.0;
const UR_TURN_R_M: f64 = UR_JUNCTION_R_M + UR_LANE_OFFSET_M;
const UR_STRAIGHT_SPEED: f64 = 10.0;
const UR_TURN_SPEED: f64 = 6.0;
const UR_VEHICLES: usize = 18;
const UR_WALK_HALF_M: f64 = 4.5;
const UR_WALK_YS: [f64; 2] = [75.0, 225.0];

const EGO_DIMS: BoxDims = BoxDims { length_m: 4.5, width_m: 1.9, height_m: 1.6 };
const PED_DIMS: BoxDims = BoxDims { length_m: 0.5, width_m: 0.5, height_m: 1.8 };
const WALK_SPEED_MPS: f64 = 1.4;

const MIN_ACTOR_GAP_M: f64 = 12.0;
const MIN_EGO_GAP_M: f64 = 15.0;
const PLACE_TRIES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioFamily {
    Highway,
    Urban,
}

impl ScenarioFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioFamily::Highway => "highway",
            ScenarioFamily::Urban => "urban",
        }
    }
}

/// Name of a built-in scenario, written `highway-0` or `urban-3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScenarioId {
    pub family: ScenarioFamily,
    pub index: u32,
}

impl ScenarioId {
    pub fn new(family: ScenarioFamily, index: u32) -> Option<ScenarioId> {
        let limit = match family {
            ScenarioFamily::Highway => HIGHWAY_VARIANTS,
            ScenarioFamily::Urban => URBAN_VARIANTS,
        };
        (index < limit).then_some(ScenarioId { family, index })
    }

    /// Stable small integer used for seed mixing.
    pub fn stable_code(&self) -> u64 {
        let fam = match self.family {
            ScenarioFamily::Highway => 0u64,
            ScenarioFamily::Urban => 1,
        };
        fam * 16 + self.index as u64
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.family.as_str(), self.index)
    }
}

impl FromStr for ScenarioId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, idx) = s
            .rsplit_once('-')
            .ok_or_else(|| format!("scenario {s:?} is not of the form <family>-<index>"))?;
        let family = match name {
            "highway" => ScenarioFamily::Highway,
            "urban" => ScenarioFamily::Urban,
            other => return Err(format!("unknown scenario family {other:?}")),
        };
        let index: u32 = idx.parse().map_err(|_| format!("bad scenario index {idx:?}"))?;
        ScenarioId::new(family, index)
            .ok_or_else(|| format!("scenario index {index} out of range for {name}"))
    }
}

/// Every built-in scenario, highways first.
pub fn all_scenarios() -> Vec<ScenarioId> {
    let mut out = Vec::new();
    for i in 0..HIGHWAY_VARIANTS {
        out.push(ScenarioId { family: ScenarioFamily::Highway, index: i });
    }
    for i in 0..URBAN_VARIANTS {
        out.push(ScenarioId { family: ScenarioFamily::Urban, index: i });
    }
    out
}

/// Incrementally assembles a closed route from straights and arcs.
struct LoopBuilder {
    pts: Vec<RoutePoint>,
    turns: Vec<(usize, usize)>,
}

impl LoopBuilder {
    fn new() -> Self {
        LoopBuilder { pts: Vec::new(), turns: Vec::new() }
    }

    fn push(&mut self, pos: Vec2, speed: f64) {
        self.pts.push(RoutePoint { pos, speed_mps: speed });
    }

    /// Appends an arc whose starting point was already pushed. Segments on
    /// the arc run at `arc_speed`; the segment leaving the final arc point
    /// runs at `exit_speed`. The whole arc is marked as a turn.
    fn arc(
        &mut self,
        center: Vec2,
        radius: f64,
        a0: f64,
        a1: f64,
        steps: usize,
        arc_speed: f64,
        exit_speed: f64,
    ) {
        let start = self.pts.len() - 1;
        self.pts.last_mut().expect("arc needs a start point").speed_mps = arc_speed;
        let pts = arc_points(center, radius, a0, a1, steps);
        let n = pts.len();
        for (i, p) in pts.into_iter().enumerate() {
            let speed = if i + 1 == n { exit_speed } else { arc_speed };
            self.push(p, speed);
        }
        self.turns.push((start, self.pts.len() - 1));
    }

    fn build(self, junctions: &[Junction]) -> RoutePath {
        RoutePath::new(self.pts, &self.turns, junctions)
    }
}

/// Stadium circuit through the straights at `x = +-offset`, driven
/// counterclockwise with semicircular caps.
fn highway_circuit(offset: f64) -> RoutePath {
    let mut b = LoopBuilder::new();
    b.push(Vec2::new(offset, 0.0), HW_STRAIGHT_SPEED);
    b.push(Vec2::new(offset, HW_SPAN_M), HW_TURN_SPEED);
    b.arc(Vec2::new(0.0, HW_SPAN_M), offset, 0.0, PI, 16, HW_TURN_SPEED, HW_STRAIGHT_SPEED);
    b.push(Vec2::new(-offset, 0.0), HW_TURN_SPEED);
    b.arc(Vec2::new(0.0, 0.0), offset, PI, 2.0 * PI, 16, HW_TURN_SPEED, HW_STRAIGHT_SPEED);
    b.build(&[])
}

fn highway_network() -> RoadNetwork {
    let routes = vec![highway_circuit(HW_INNER_OFFSET_M), highway_circuit(HW_OUTER_OFFSET_M)];
    let (r_in, r_out) = (HW_INNER_OFFSET_M - 1.75, HW_OUTER_OFFSET_M + 1.75);
    let mut map_quads = vec![
        [
            Vec2::new(r_in, 0.0),
            Vec2::new(r_out, 0.0),
            Vec2::new(r_out, HW_SPAN_M),
            Vec2::new(r_in, HW_SPAN_M),
        ],
        [
            Vec2::new(-r_out, 0.0),
            Vec2::new(-r_in, 0.0),
            Vec2::new(-r_in, HW_SPAN_M),
            Vec2::new(-r_out, HW_SPAN_M),
        ],
    ];
    for (center, a_base) in [(Vec2::new(0.0, HW_SPAN_M), 0.0), (Vec2::new(0.0, 0.0), PI)] {
        for k in 0..8 {
            let a0 = a_base + PI * k as f64 / 8.0;
            let a1 = a_base + PI * (k + 1) as f64 / 8.0;
            let dir0 = Vec2::new(a0.cos(), a0.sin());
            let dir1 = Vec2::new(a1.cos(), a1.sin());
            map_quads.push([
                center + dir0 * r_in,
                center + dir0 * r_out,
                center + dir1 * r_out,
                center + dir1 * r_in,
            ]);
        }
    }
    RoadNetwork { routes, junctions: Vec::new(), crosswalks: Vec::new(), map_quads }
}

/// Counterclockwise loop around the rectangle `[x0, x1] x [y0, y1]`,
/// using the right-hand lane of each bounding road.
fn urban_loop(x0: f64, x1: f64, y0: f64, y1: f64, junctions: &[Junction]) -> RoutePath {
    let (l, e, r) = (UR_LANE_OFFSET_M, UR_JUNCTION_R_M, UR_TURN_R_M);
    let (ss, ts) = (UR_STRAIGHT_SPEED, UR_TURN_SPEED);
    let mut b = LoopBuilder::new();
    b.push(Vec2::new(x0 + e, y0 - l), ss);
    b.push(Vec2::new(x1 - e, y0 - l), ts);
    b.arc(Vec2::new(x1 - e, y0 + e), r, -PI / 2.0, 0.0, 8, ts, ss);
    b.push(Vec2::new(x1 + l, y1 - e), ts);
    b.arc(Vec2::new(x1 - e, y1 - e), r, 0.0, PI / 2.0, 8, ts, ss);
    b.push(Vec2::new(x0 + e, y1 + l), ts);
    b.arc(Vec2::new(x0 + e, y1 - e), r, PI / 2.0, PI, 8, ts, ss);
    b.push(Vec2::new(x0 - l, y0 + e), ts);
    b.arc(Vec2::new(x0 + e, y0 + e), r, PI, 1.5 * PI, 8, ts, ss);
    b.build(junctions)
}

fn urban_network() -> RoadNetwork {
    let mut junctions = Vec::new();
    for &y in &UR_GRID {
        for &x in &UR_GRID {
            junctions.push(Junction { center: Vec2::new(x, y), radius_m: UR_JUNCTION_R_M });
        }
    }
    let routes = vec![
        urban_loop(0.0, 150.0, 0.0, 150.0, &junctions),
        urban_loop(150.0, 300.0, 0.0, 150.0, &junctions),
        urban_loop(150.0, 300.0, 150.0, 300.0, &junctions),
        urban_loop(0.0, 150.0, 150.0, 300.0, &junctions),
        urban_loop(0.0, 300.0, 0.0, 300.0, &junctions),
        urban_loop(0.0, 150.0, 0.0, 300.0, &junctions),
    ];
    let mut crosswalks = Vec::new();
    for &x in &UR_GRID {
        for &y in &UR_WALK_YS {
            crosswalks.push(Crosswalk {
                a: Vec2::new(x - UR_WALK_HALF_M, y),
                b: Vec2::new(x + UR_WALK_HALF_M, y),
            });
        }
    }
    let mut map_quads = Vec::new();
    let (lo, hi) = (-12.0, 312.0);
    for &c in &UR_GRID {
        map_quads.push([
            Vec2::new(lo, c - 3.0),
            Vec2::new(hi, c - 3.0),
            Vec2::new(hi, c + 3.0),
            Vec2::new(lo, c + 3.0),
        ]);
        map_quads.push([
            Vec2::new(c - 3.0, lo),
            Vec2::new(c + 3.0, lo),
            Vec2::new(c + 3.0, hi),
            Vec2::new(c - 3.0, hi),
        ]);
    }
    RoadNetwork { routes, junctions, crosswalks, map_quads }
}

fn vehicle_dims(rng: &mut ChaCha8Rng) -> BoxDims {
    BoxDims {
        length_m: rng.gen_range(4.2..5.0),
        width_m: rng.gen_range(1.75..2.0),
        height_m: rng.gen_range(1.45..1.75),
    }
}

/// Road layout for a scenario. The layout depends only on the family; the
/// seed only moves actors around on it.
pub fn network_for(id: ScenarioId) -> RoadNetwork {
    match id.family {
        ScenarioFamily::Highway => highway_network(),
        ScenarioFamily::Urban => urban_network(),
    }
}

/// Builds the full initial world for a scenario and seed: network, ego on
/// its assigned route, and seeded traffic with minimum spacing.
pub fn make_scenario(id: ScenarioId, seed: u64) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (network, vehicle_count, bounds) = match id.family {
        ScenarioFamily::Highway => (
            highway_network(),
            HW_VEHICLES,
            (Vec2::new(-60.0, -60.0), Vec2::new(60.0, HW_SPAN_M + 60.0)),
        ),
        ScenarioFamily::Urban => {
            (urban_network(), UR_VEHICLES, (Vec2::new(-60.0, -60.0), Vec2::new(360.0, 360.0)))
        }
    };

    let ego_route = id.index as usize % network.routes.len();
    let route = &network.routes[ego_route];
    let ego_s = rng.gen_range(0.0..route.total_len());
    let (p, yaw, limit) = route.pose_at(ego_s);
    // The ego starts in flow at half the local limit, like the scripted
    // traffic, rather than parked in a live lane.
    let ego = EgoState {
        pose: PlanPose::new(p.x, p.y, yaw, Frame::World),
        speed_mps: 0.5 * limit,
        yaw_rate: 0.0,
        dims: EGO_DIMS,
        route: ego_route,
    };

    let mut actors: Vec<Actor> = Vec::new();
    let mut next_id = 1u32;
    for k in 0..vehicle_count {
        let route_idx = k % network.routes.len();
        let route = &network.routes[route_idx];
        let dims = vehicle_dims(&mut rng);
        let mut placed = None;
        for _ in 0..PLACE_TRIES {
            let s = rng.gen_range(0.0..route.total_len());
            let (p, yaw, limit) = route.pose_at(s);
            let clear_ego = (p - ego.pose.position()).norm() >= MIN_EGO_GAP_M;
            let clear_rest =
                actors.iter().all(|a| (p - a.pose.position()).norm() >= MIN_ACTOR_GAP_M);
            if clear_ego && clear_rest {
                placed = Some((s, p, yaw, limit));
                break;
            }
        }
        if let Some((s, p, yaw, limit)) = placed {
            actors.push(Actor {
                id: next_id,
                class: ObjectClass::Vehicle,
                pose: PlanPose::new(p.x, p.y, yaw, Frame::World),
                speed_mps: 0.5 * limit,
                dims,
                kind: ActorKind::RouteVehicle { route: route_idx, s },
                wait_s: 0.0,
            });
            next_id += 1;
        }
    }

    for (w, walk) in network.crosswalks.iter().enumerate() {
        let s = rng.gen_range(0.0..walk.length());
        let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let p = walk.point_at(s);
        actors.push(Actor {
            id: next_id,
            class: ObjectClass::Pedestrian,
            pose: PlanPose::new(p.x, p.y, walk.travel_yaw(dir), Frame::World),
            speed_mps: WALK_SPEED_MPS,
            dims: PED_DIMS,
            kind: ActorKind::Walker { crosswalk: w, s, dir },
            wait_s: 0.0,
        });
        next_id += 1;
    }

    WorldState {
        params: SimParams::default(),
        scenario: id,
        network,
        ego,
        actors,
        frame_index: 0,
        contacts: BTreeSet::new(),
        bounds,
    }
}
