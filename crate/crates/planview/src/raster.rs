//! Plan-view occupancy grids.
//!
//! Grids are binary, one channel per content layer, stored row-major with
//! the top row first. "Up" in the grid is forward travel (travel frame) or
//! world north (north-up frame). A cell is filled when its center lies
//! inside or on the boundary of a box footprint.

use crate::geometry::{box_corners, to_frame, PlanPose, Vec2, ViewFrame};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Objects farther than this along the optical axis are dropped before
/// rasterization.
pub const DEPTH_CUT_M: f64 = 64.0;

/// Objects farther to the side than this in the camera frame are dropped
/// before rasterization.
pub const LATERAL_CUT_M: f64 = 32.0;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("channel {0:?} is not present in this image")]
    MissingChannel(Channel),
    #[error("grid dimensions must be positive, got {0}x{1}")]
    EmptyGrid(u32, u32),
    #[error("meters_per_px must be positive, got {0}")]
    BadResolution(f64),
}

/// Content layers a plan-view image can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Vehicles,
    Pedestrians,
    Map,
    EgoHistory,
}

impl Channel {
    pub const ALL: [Channel; 4] =
        [Channel::Vehicles, Channel::Pedestrians, Channel::Map, Channel::EgoHistory];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Vehicles => "vehicles",
            Channel::Pedestrians => "pedestrians",
            Channel::Map => "map",
            Channel::EgoHistory => "ego_history",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Channel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown channel {s:?}"))
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which layers to render.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSet {
    pub vehicles: bool,
    pub pedestrians: bool,
    pub map: bool,
    pub ego_history: bool,
}

impl LayerSet {
    pub fn contains(&self, channel: Channel) -> bool {
        match channel {
            Channel::Vehicles => self.vehicles,
            Channel::Pedestrians => self.pedestrians,
            Channel::Map => self.map,
            Channel::EgoHistory => self.ego_history,
        }
    }
}

impl Default for LayerSet {
    /// Vehicles and pedestrians only.
    fn default() -> Self {
        LayerSet { vehicles: true, pedestrians: true, map: false, ego_history: false }
    }
}

/// Geometry of a plan-view grid.
///
/// In the travel frame the ego sits at the bottom-center cell and the grid
/// covers lateral `[-w/2, w/2)` by forward `[0, h)` meters. In the north-up
/// frame the ego sits at the center cell and both axes cover `[-w/2, w/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width_px: u32,
    pub height_px: u32,
    pub meters_per_px: f64,
    pub frame: ViewFrame,
    pub layers: LayerSet,
}

impl Default for GridSpec {
    /// 512x512 cells at 0.125 m per cell: a 64 m by 64 m window.
    fn default() -> Self {
        GridSpec {
            width_px: 512,
            height_px: 512,
            meters_per_px: 0.125,
            frame: ViewFrame::Travel,
            layers: LayerSet::default(),
        }
    }
}

impl GridSpec {
    /// Metric extent `(x_min, y_min, x_max, y_max)` covered by the grid.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let w = self.width_px as f64 * self.meters_per_px;
        let h = self.height_px as f64 * self.meters_per_px;
        match self.frame {
            ViewFrame::Travel => (-w / 2.0, 0.0, w / 2.0, h),
            ViewFrame::NorthUp => (-w / 2.0, -h / 2.0, w / 2.0, h / 2.0),
        }
    }

    /// Metric center of cell `(row, col)`; row 0 is the top of the grid.
    pub fn cell_center(&self, row: u32, col: u32) -> Vec2 {
        let (x_min, y_min, _, _) = self.extent();
        Vec2::new(
            x_min + (col as f64 + 0.5) * self.meters_per_px,
            y_min + (self.height_px - row) as f64 * self.meters_per_px - 0.5 * self.meters_per_px,
        )
    }

    /// Cell containing a metric point, if any. Both axes are half-open:
    /// the low edge belongs to the grid, the high edge does not.
    pub fn cell_of(&self, p: Vec2) -> Option<(u32, u32)> {
        let (x_min, y_min, _, _) = self.extent();
        let fx = ((p.x - x_min) / self.meters_per_px).floor();
        let fy = ((p.y - y_min) / self.meters_per_px).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width_px as f64 || fy >= self.height_px as f64 {
            return None;
        }
        Some((self.height_px - 1 - fy as u32, fx as u32))
    }

    fn validate(&self) -> Result<(), RasterError> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(RasterError::EmptyGrid(self.width_px, self.height_px));
        }
        if !(self.meters_per_px > 0.0) {
            return Err(RasterError::BadResolution(self.meters_per_px));
        }
        Ok(())
    }
}

/// A rendered multi-channel binary grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanViewImage {
    spec: GridSpec,
    channels: Vec<(Channel, Vec<u8>)>,
}

impl PlanViewImage {
    /// Allocates zeroed channels for every layer enabled in the spec.
    pub fn new(spec: GridSpec) -> Result<Self, RasterError> {
        spec.validate()?;
        let len = spec.width_px as usize * spec.height_px as usize;
        let channels = Channel::ALL
            .into_iter()
            .filter(|c| spec.layers.contains(*c))
            .map(|c| (c, vec![0u8; len]))
            .collect();
        Ok(PlanViewImage { spec, channels })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn channel(&self, channel: Channel) -> Option<&[u8]> {
        self.channels.iter().find(|(c, _)| *c == channel).map(|(_, cells)| cells.as_slice())
    }

    fn channel_mut(&mut self, channel: Channel) -> Option<&mut Vec<u8>> {
        self.channels.iter_mut().find(|(c, _)| *c == channel).map(|(_, cells)| cells)
    }

    pub fn cell(&self, channel: Channel, row: u32, col: u32) -> Option<u8> {
        let cells = self.channel(channel)?;
        cells.get(row as usize * self.spec.width_px as usize + col as usize).copied()
    }

    /// Number of filled cells in a channel.
    pub fn count(&self, channel: Channel) -> usize {
        self.channel(channel).map_or(0, |c| c.iter().filter(|&&v| v != 0).count())
    }
}

/// Inclusive point-in-convex-quad test: every edge cross product is
/// non-negative once the winding is counterclockwise.
fn inside_convex_quad(corners: &[Vec2; 4], p: Vec2) -> bool {
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        if (b - a).cross(p - a) < 0.0 {
            return false;
        }
    }
    true
}

fn signed_area(corners: &[Vec2; 4]) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        acc += corners[i].cross(corners[(i + 1) % 4]);
    }
    acc / 2.0
}

/// Fills every cell whose center lies inside or on the boundary of the
/// convex quad, restricted to the quad's bounding box for speed.
fn rasterize_quad(spec: &GridSpec, cells: &mut [u8], corners: &[Vec2; 4]) {
    let mut quad = *corners;
    if signed_area(&quad) < 0.0 {
        quad.reverse();
    }
    let (x_min, y_min, _, _) = spec.extent();
    let res = spec.meters_per_px;
    let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in quad {
        lo_x = lo_x.min(c.x);
        hi_x = hi_x.max(c.x);
        lo_y = lo_y.min(c.y);
        hi_y = hi_y.max(c.y);
    }
    // Center of col c is x_min + (c + 0.5) * res; pad by one cell to be safe.
    let col_lo = (((lo_x - x_min) / res - 0.5).floor() - 1.0).max(0.0) as i64;
    let col_hi = ((((hi_x - x_min) / res - 0.5).ceil()) + 1.0).min(spec.width_px as f64 - 1.0) as i64;
    let row_top = (((lo_y - y_min) / res - 0.5).floor() - 1.0).max(0.0) as i64;
    let row_bot =
        ((((hi_y - y_min) / res - 0.5).ceil()) + 1.0).min(spec.height_px as f64 - 1.0) as i64;
    if col_lo > col_hi || row_top > row_bot {
        return;
    }
    for fy in row_top..=row_bot {
        let row = spec.height_px as i64 - 1 - fy;
        if row < 0 || row >= spec.height_px as i64 {
            continue;
        }
        let cy = y_min + (fy as f64 + 0.5) * res;
        for col in col_lo..=col_hi {
            let cx = x_min + (col as f64 + 0.5) * res;
            if inside_convex_quad(&quad, Vec2::new(cx, cy)) {
                cells[row as usize * spec.width_px as usize + col as usize] = 1;
            }
        }
    }
}

/// Public single-box entry point used by tests and tools: fills `channel`
/// with the footprint of an oriented box given in grid coordinates.
pub fn rasterize_box(
    img: &mut PlanViewImage,
    channel: Channel,
    pose: &PlanPose,
    length_m: f64,
    width_m: f64,
) -> Result<(), RasterError> {
    let corners = box_corners(pose, length_m, width_m);
    let spec = img.spec;
    let cells = img.channel_mut(channel).ok_or(RasterError::MissingChannel(channel))?;
    rasterize_quad(&spec, cells, &corners);
    Ok(())
}

/// An object to render: camera-frame plan pose plus footprint dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanObject {
    pub class: crate::geometry::ObjectClass,
    pub pose: PlanPose,
    pub length_m: f64,
    pub width_m: f64,
}

fn world_point_to_view(p: Vec2, ego_world: &PlanPose, frame: ViewFrame) -> Vec2 {
    match frame {
        ViewFrame::Travel => (p - ego_world.position()).rotated(-ego_world.yaw_rad),
        ViewFrame::NorthUp => p - ego_world.position(),
    }
}

/// Renders objects (camera-frame poses), the drivable map, and the ego
/// position history into a fresh plan-view image.
///
/// Objects deeper than [`DEPTH_CUT_M`] or farther sideways than
/// [`LATERAL_CUT_M`] are skipped before any frame change. Map quads and
/// history poses are given in the world frame.
pub fn render_plan_view(
    objects: &[PlanObject],
    ego_world: &PlanPose,
    spec: &GridSpec,
    history: &[PlanPose],
    map_quads: &[[Vec2; 4]],
) -> Result<PlanViewImage, RasterError> {
    let mut img = PlanViewImage::new(*spec)?;

    for obj in objects {
        if obj.pose.y_m > DEPTH_CUT_M || obj.pose.x_m.abs() > LATERAL_CUT_M {
            continue;
        }
        let channel = match obj.class {
            crate::geometry::ObjectClass::Vehicle => Channel::Vehicles,
            crate::geometry::ObjectClass::Pedestrian => Channel::Pedestrians,
        };
        if !spec.layers.contains(channel) {
            continue;
        }
        let view_pose = to_frame(&obj.pose, ego_world, spec.frame)
            .expect("render objects must be camera-frame poses");
        let corners = box_corners(&view_pose, obj.length_m, obj.width_m);
        let grid_spec = img.spec;
        if let Some(cells) = img.channel_mut(channel) {
            rasterize_quad(&grid_spec, cells, &corners);
        }
    }

    if spec.layers.map {
        let grid_spec = img.spec;
        if let Some(cells) = img.channel_mut(Channel::Map) {
            for quad in map_quads {
                let local = [
                    world_point_to_view(quad[0], ego_world, spec.frame),
                    world_point_to_view(quad[1], ego_world, spec.frame),
                    world_point_to_view(quad[2], ego_world, spec.frame),
                    world_point_to_view(quad[3], ego_world, spec.frame),
                ];
                rasterize_quad(&grid_spec, cells, &local);
            }
        }
    }

    if spec.layers.ego_history {
        let grid_spec = img.spec;
        let width = grid_spec.width_px as usize;
        if let Some(cells) = img.channel_mut(Channel::EgoHistory) {
            for pose in history {
                let p = world_point_to_view(pose.position(), ego_world, spec.frame);
                if let Some((row, col)) = grid_spec.cell_of(p) {
                    cells[row as usize * width + col as usize] = 1;
                }
            }
        }
    }

    Ok(img)
}

/// Encodes one channel as a binary PGM (P5) image: filled cells become 255,
/// empty cells 0, rows written top to bottom.
pub fn export_pgm(img: &PlanViewImage, channel: Channel) -> Result<Vec<u8>, RasterError> {
    let cells = img.channel(channel).ok_or(RasterError::MissingChannel(channel))?;
    let mut out = format!("P5\n{} {}\n255\n", img.spec.width_px, img.spec.height_px).into_bytes();
    out.extend(cells.iter().map(|&v| if v != 0 { 255u8 } else { 0u8 }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Frame, ObjectClass};
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn travel_spec() -> GridSpec {
        GridSpec::default()
    }

    fn cam_pose(x: f64, y: f64, yaw: f64) -> PlanPose {
        PlanPose::new(x, y, yaw, Frame::Camera)
    }

    fn ego_world(x: f64, y: f64, yaw: f64) -> PlanPose {
        PlanPose::new(x, y, yaw, Frame::World)
    }

    /// Independent fill oracle: a point is inside an oriented rectangle when
    /// its box-local coordinates fit within the half extents (inclusive).
    fn oracle_inside(pose: &PlanPose, length: f64, width: f64, p: Vec2) -> bool {
        let local = (p - pose.position()).rotated(-pose.yaw_rad);
        local.x.abs() <= width / 2.0 && local.y.abs() <= length / 2.0
    }

    fn oracle_fill(spec: &GridSpec, pose: &PlanPose, length: f64, width: f64) -> Vec<u8> {
        let mut cells = vec![0u8; (spec.width_px * spec.height_px) as usize];
        for row in 0..spec.height_px {
            for col in 0..spec.width_px {
                if oracle_inside(pose, length, width, spec.cell_center(row, col)) {
                    cells[(row * spec.width_px + col) as usize] = 1;
                }
            }
        }
        cells
    }

    #[test]
    fn travel_anchor_is_bottom_center() {
        let spec = travel_spec();
        assert_eq!(spec.cell_of(Vec2::ZERO), Some((511, 256)));
        let c = spec.cell_center(511, 256);
        assert!(c.x > 0.0 && c.x < 0.125 && c.y > 0.0 && c.y < 0.125);
    }

    #[test]
    fn north_up_anchor_is_center() {
        let spec = GridSpec { frame: ViewFrame::NorthUp, ..GridSpec::default() };
        assert_eq!(spec.cell_of(Vec2::ZERO), Some((255, 256)));
    }

    #[test]
    fn cell_of_respects_half_open_edges() {
        let spec = travel_spec();
        assert_eq!(spec.cell_of(Vec2::new(-32.0, 0.0)), Some((511, 0)));
        assert_eq!(spec.cell_of(Vec2::new(32.0, 0.0)), None);
        assert_eq!(spec.cell_of(Vec2::new(0.0, 64.0)), None);
        assert_eq!(spec.cell_of(Vec2::new(0.0, 63.999)), Some((0, 256)));
        assert_eq!(spec.cell_of(Vec2::new(0.0, -0.001)), None);
    }

    #[test]
    fn axis_aligned_box_fills_exact_block() {
        let spec = travel_spec();
        let mut img = PlanViewImage::new(spec).unwrap();
        rasterize_box(&mut img, Channel::Vehicles, &cam_pose(0.0, 10.0, 0.0), 4.0, 2.0).unwrap();
        assert_eq!(img.count(Channel::Vehicles), 512);
        for row in 0..512 {
            for col in 0..512 {
                let expected = (416..448).contains(&row) && (248..264).contains(&col);
                assert_eq!(
                    img.cell(Channel::Vehicles, row, col) == Some(1),
                    expected,
                    "cell ({row},{col})"
                );
            }
        }
    }

    #[test]
    fn fill_matches_independent_oracle() {
        let spec = travel_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let pose = cam_pose(
                rng.gen_range(-34.0..34.0),
                rng.gen_range(-4.0..66.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            );
            let length = rng.gen_range(0.4..8.0);
            let width = rng.gen_range(0.4..3.0);
            let mut img = PlanViewImage::new(spec).unwrap();
            rasterize_box(&mut img, Channel::Vehicles, &pose, length, width).unwrap();
            let expected = oracle_fill(&spec, &pose, length, width);
            assert_eq!(img.channel(Channel::Vehicles).unwrap(), expected.as_slice());
        }
    }

    #[test]
    fn object_cuts_apply_before_transform() {
        let spec = travel_spec();
        let objects = [
            PlanObject {
                class: ObjectClass::Vehicle,
                pose: cam_pose(0.0, 70.0, 0.0),
                length_m: 4.0,
                width_m: 2.0,
            },
            PlanObject {
                class: ObjectClass::Vehicle,
                pose: cam_pose(33.0, 10.0, 0.0),
                length_m: 4.0,
                width_m: 2.0,
            },
        ];
        let img =
            render_plan_view(&objects, &ego_world(0.0, 0.0, 0.0), &spec, &[], &[]).unwrap();
        assert_eq!(img.count(Channel::Vehicles), 0);
    }

    #[test]
    fn render_is_object_order_invariant() {
        let spec = travel_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut objects: Vec<PlanObject> = (0..12)
            .map(|i| PlanObject {
                class: if i % 3 == 0 { ObjectClass::Pedestrian } else { ObjectClass::Vehicle },
                pose: cam_pose(
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(2.0..60.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                ),
                length_m: rng.gen_range(0.5..5.0),
                width_m: rng.gen_range(0.5..2.0),
            })
            .collect();
        let ego = ego_world(3.0, -7.0, 1.1);
        let a = render_plan_view(&objects, &ego, &spec, &[], &[]).unwrap();
        objects.shuffle(&mut rng);
        let b = render_plan_view(&objects, &ego, &spec, &[], &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn north_up_quarter_turns_permute_cells() {
        let spec = GridSpec { frame: ViewFrame::NorthUp, ..GridSpec::default() };
        let objects: Vec<PlanObject> = vec![
            PlanObject {
                class: ObjectClass::Vehicle,
                pose: cam_pose(4.37, 12.91, 0.83),
                length_m: 4.1,
                width_m: 1.7,
            },
            PlanObject {
                class: ObjectClass::Vehicle,
                pose: cam_pose(-9.02, 25.4, 3.9),
                length_m: 5.3,
                width_m: 2.1,
            },
        ];
        let base = render_plan_view(&objects, &ego_world(0.0, 0.0, 0.0), &spec, &[], &[]).unwrap();
        let turned =
            render_plan_view(&objects, &ego_world(0.0, 0.0, FRAC_PI_2), &spec, &[], &[]).unwrap();
        // Rotating the ego by +90 degrees rotates the north-up grid content:
        // cell (r, c) of the base grid moves to (511 - c, r).
        let b = base.channel(Channel::Vehicles).unwrap();
        let t = turned.channel(Channel::Vehicles).unwrap();
        for row in 0..512usize {
            for col in 0..512usize {
                assert_eq!(
                    b[row * 512 + col],
                    t[(511 - col) * 512 + row],
                    "cell ({row},{col})"
                );
            }
        }
    }

    #[test]
    fn history_marks_single_cells() {
        let spec = GridSpec {
            layers: LayerSet { ego_history: true, ..LayerSet::default() },
            ..GridSpec::default()
        };
        let ego = ego_world(100.0, 50.0, 0.0);
        let history = vec![
            PlanPose::new(100.0, 50.0, 0.0, Frame::World),
            PlanPose::new(100.0, 45.0, 0.0, Frame::World),
            PlanPose::new(100.0, 30.0, 0.0, Frame::World),
        ];
        let img = render_plan_view(&[], &ego, &spec, &history, &[]).unwrap();
        // Current position marks the anchor cell; 5 m behind is outside the
        // forward-only travel window, as is 20 m behind.
        assert_eq!(img.count(Channel::EgoHistory), 1);
        assert_eq!(img.cell(Channel::EgoHistory, 511, 256), Some(1));
    }

    #[test]
    fn map_quads_render_in_travel_frame() {
        let spec = GridSpec {
            layers: LayerSet { map: true, ..LayerSet::default() },
            ..GridSpec::default()
        };
        let ego = ego_world(0.0, 0.0, 0.0);
        // A 2 m wide, 64 m long strip straight ahead of the ego.
        let quad = [
            Vec2::new(-1.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 64.0),
            Vec2::new(-1.0, 64.0),
        ];
        let img = render_plan_view(&[], &ego, &spec, &[], &[quad]).unwrap();
        let count = img.count(Channel::Map);
        assert_eq!(count, 16 * 512);
    }

    #[test]
    fn pgm_export_is_byte_exact() {
        let spec = GridSpec {
            width_px: 2,
            height_px: 2,
            meters_per_px: 1.0,
            frame: ViewFrame::Travel,
            layers: LayerSet::default(),
        };
        let mut img = PlanViewImage::new(spec).unwrap();
        // Top-right cell: row 0, col 1.
        img.channel_mut(Channel::Vehicles).unwrap()[1] = 1;
        let bytes = export_pgm(&img, Channel::Vehicles).unwrap();
        let mut expected = b"P5\n2 2\n255\n".to_vec();
        expected.extend([0u8, 255, 0, 0]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn export_missing_channel_errors() {
        let img = PlanViewImage::new(GridSpec::default()).unwrap();
        assert!(matches!(
            export_pgm(&img, Channel::Map),
            Err(RasterError::MissingChannel(Channel::Map))
        ));
    }
}
