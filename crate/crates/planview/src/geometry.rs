//! Pinhole-camera geometry and plan-view reprojection.
//!
//! Conventions used throughout the crate:
//!
//! - Yaw angles are radians, counterclockwise-positive, normalized to
//!   `[0, 2π)`, with `0` meaning "facing the frame's +Y axis".
//! - The camera frame has X pointing right and Y pointing forward along the
//!   optical axis; depth is measured along Y, not along the ray.
//! - Pixel offsets (`x_center_offset`) are measured from the image's
//!   vertical centerline, positive to the right.
//! - The travel frame is the camera frame re-labelled for rasterization
//!   (up is the direction of travel); the north-up frame is the camera
//!   frame rotated by the ego's world yaw so that up is world north.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

/// Height of the camera above the ground plane, used only for the vertical
/// extent of projected 2-D boxes.
pub const CAMERA_HEIGHT_M: f64 = 1.5;

/// Angular slack on the field-of-view boundary so that objects exactly on
/// the edge stay included under floating-point rounding.
const FOV_EPS_RAD: f64 = 1e-12;

/// Depth floor for projecting box corners that reach behind the image plane.
const NEAR_PLANE_M: f64 = 0.1;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("image width must be positive, got {0}")]
    BadImageWidth(f64),
    #[error("image height must be positive, got {0}")]
    BadImageHeight(f64),
    #[error("horizontal fov must lie strictly between 0 and 180 degrees, got {0}")]
    BadFov(f64),
    #[error("expected a pose in the {expected:?} frame, got {got:?}")]
    WrongFrame { expected: Frame, got: Frame },
}

/// A 2-D point or vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Z component of the cross product `self × other`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Counterclockwise rotation by `angle_rad`.
    pub fn rotated(self, angle_rad: f64) -> Vec2 {
        let (s, c) = angle_rad.sin_cos();
        Vec2::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }

    /// Counterclockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Unit heading vector for a yaw angle (`yaw = 0` points along +Y).
pub fn heading(yaw_rad: f64) -> Vec2 {
    let (s, c) = yaw_rad.sin_cos();
    Vec2::new(-s, c)
}

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_angle(theta_rad: f64) -> f64 {
    let r = theta_rad.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed difference `a - b` wrapped to `[-π, π)`.
pub fn angle_diff(a_rad: f64, b_rad: f64) -> f64 {
    let d = (a_rad - b_rad).rem_euclid(TAU);
    if d >= std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// Shortest circular distance between two angles, in `[0, π]`.
pub fn circular_dist(a_rad: f64, b_rad: f64) -> f64 {
    angle_diff(a_rad, b_rad).abs()
}

/// Coordinate frames a plan pose can live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Ego camera frame: X right, Y forward.
    Camera,
    /// Rasterization frame aligned with the direction of travel.
    Travel,
    /// Rasterization frame aligned with world north.
    NorthUp,
    /// Global simulation frame: X east, Y north.
    World,
}

/// The two rasterization frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewFrame {
    Travel,
    NorthUp,
}

impl ViewFrame {
    pub fn frame(self) -> Frame {
        match self {
            ViewFrame::Travel => Frame::Travel,
            ViewFrame::NorthUp => Frame::NorthUp,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ViewFrame::Travel => "travel",
            ViewFrame::NorthUp => "north",
        }
    }
}

impl std::str::FromStr for ViewFrame {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "travel" => Ok(ViewFrame::Travel),
            "north" | "north_up" => Ok(ViewFrame::NorthUp),
            other => Err(format!("unknown view frame {other:?} (expected travel|north)")),
        }
    }
}

impl fmt::Display for ViewFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Object category, as far as perception is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Vehicle,
    Pedestrian,
}

impl ObjectClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Vehicle => "vehicle",
            ObjectClass::Pedestrian => "pedestrian",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Extents of an object's bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDims {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl BoxDims {
    pub fn new(length_m: f64, width_m: f64, height_m: f64) -> Self {
        BoxDims { length_m, width_m, height_m }
    }

    pub fn volume(&self) -> f64 {
        self.length_m * self.width_m * self.height_m
    }
}

/// A 2-D pose on the ground plane, tagged with the frame it lives in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanPose {
    pub x_m: f64,
    pub y_m: f64,
    /// Counterclockwise yaw in `[0, 2π)`; `0` faces the frame's +Y axis.
    pub yaw_rad: f64,
    pub frame: Frame,
}

impl PlanPose {
    pub fn new(x_m: f64, y_m: f64, yaw_rad: f64, frame: Frame) -> Self {
        PlanPose { x_m, y_m, yaw_rad: wrap_angle(yaw_rad), frame }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x_m, self.y_m)
    }

    pub fn heading(&self) -> Vec2 {
        heading(self.yaw_rad)
    }
}

/// Pinhole intrinsics for the forward camera.
///
/// `focal_length_px` is derived from the width and horizontal field of view
/// on construction and the two stay consistent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal_length_px: f64,
    pub image_width_px: f64,
    pub image_height_px: f64,
    pub hfov_deg: f64,
}

impl CameraIntrinsics {
    pub fn new(
        image_width_px: f64,
        image_height_px: f64,
        hfov_deg: f64,
    ) -> Result<Self, GeometryError> {
        if !(image_height_px > 0.0) {
            return Err(GeometryError::BadImageHeight(image_height_px));
        }
        let focal_length_px = focal_from_fov(image_width_px, hfov_deg)?;
        Ok(CameraIntrinsics { focal_length_px, image_width_px, image_height_px, hfov_deg })
    }

    pub fn half_fov_rad(&self) -> f64 {
        self.hfov_deg.to_radians() / 2.0
    }
}

impl Default for CameraIntrinsics {
    /// 640x352 at 60 degrees horizontal field of view.
    fn default() -> Self {
        CameraIntrinsics::new(640.0, 352.0, 60.0).expect("default intrinsics are valid")
    }
}

/// An axis-aligned 2-D detection in pixel coordinates (v grows downward).
///
/// `x_center_offset` is the signed horizontal distance, in pixels, of the
/// projected object center from the image's vertical centerline. The box
/// corners are clamped to the image, so for partially visible objects the
/// clamped box center and `x_center_offset` can differ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    pub object_class: ObjectClass,
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub x_center_offset: f64,
}

/// A monocular 3-D estimate for one object: depth along the optical axis,
/// yaw relative to the ray through the object ("local" or observation yaw),
/// and box dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate3D {
    pub depth_m: f64,
    pub local_yaw_rad: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl Estimate3D {
    pub fn dims(&self) -> BoxDims {
        BoxDims::new(self.length_m, self.width_m, self.height_m)
    }
}

/// Focal length in pixels for an image width and horizontal field of view.
pub fn focal_from_fov(image_width_px: f64, hfov_deg: f64) -> Result<f64, GeometryError> {
    if !(image_width_px > 0.0) {
        return Err(GeometryError::BadImageWidth(image_width_px));
    }
    if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
        return Err(GeometryError::BadFov(hfov_deg));
    }
    Ok(image_width_px / 2.0 / (hfov_deg.to_radians() / 2.0).tan())
}

/// Converts a local (observation-relative) yaw to a camera-frame yaw given
/// the horizontal pixel offset of the object center.
pub fn local_to_global_yaw(
    local_yaw_rad: f64,
    x_center_offset_px: f64,
    focal_length_px: f64,
) -> f64 {
    wrap_angle(local_yaw_rad - (x_center_offset_px / focal_length_px).atan())
}

/// Inverse of [`local_to_global_yaw`].
pub fn global_to_local_yaw(
    global_yaw_rad: f64,
    x_center_offset_px: f64,
    focal_length_px: f64,
) -> f64 {
    wrap_angle(global_yaw_rad + (x_center_offset_px / focal_length_px).atan())
}

/// Plan-view location in the camera frame from depth and pixel offset:
/// `x = depth * x_off / f`, `y = depth`.
pub fn plan_location(depth_m: f64, x_center_offset_px: f64, focal_length_px: f64) -> Vec2 {
    Vec2::new(depth_m * x_center_offset_px / focal_length_px, depth_m)
}

/// Ground-plane corners of an oriented box. Pre-rotation corner order is
/// `(+w/2, +l/2), (+w/2, -l/2), (-w/2, -l/2), (-w/2, +l/2)`.
pub fn box_corners(pose: &PlanPose, length_m: f64, width_m: f64) -> [Vec2; 4] {
    let hw = width_m / 2.0;
    let hl = length_m / 2.0;
    let center = pose.position();
    let offsets = [
        Vec2::new(hw, hl),
        Vec2::new(hw, -hl),
        Vec2::new(-hw, -hl),
        Vec2::new(-hw, hl),
    ];
    offsets.map(|o| center + o.rotated(pose.yaw_rad))
}

/// Re-expresses a camera-frame pose in one of the rasterization frames.
///
/// The travel frame is the camera frame itself; the north-up frame rotates
/// positions and yaws by the ego's world yaw so that +Y points north.
pub fn to_frame(
    pose: &PlanPose,
    ego_world: &PlanPose,
    target: ViewFrame,
) -> Result<PlanPose, GeometryError> {
    if pose.frame != Frame::Camera {
        return Err(GeometryError::WrongFrame { expected: Frame::Camera, got: pose.frame });
    }
    if ego_world.frame != Frame::World {
        return Err(GeometryError::WrongFrame { expected: Frame::World, got: ego_world.frame });
    }
    Ok(match target {
        ViewFrame::Travel => PlanPose::new(pose.x_m, pose.y_m, pose.yaw_rad, Frame::Travel),
        ViewFrame::NorthUp => {
            let p = pose.position().rotated(ego_world.yaw_rad);
            PlanPose::new(p.x, p.y, pose.yaw_rad + ego_world.yaw_rad, Frame::NorthUp)
        }
    })
}

/// Expresses a world-frame pose in the ego camera frame.
pub fn world_to_camera(pose: &PlanPose, ego_world: &PlanPose) -> PlanPose {
    debug_assert_eq!(pose.frame, Frame::World);
    debug_assert_eq!(ego_world.frame, Frame::World);
    let rel = (pose.position() - ego_world.position()).rotated(-ego_world.yaw_rad);
    PlanPose::new(rel.x, rel.y, pose.yaw_rad - ego_world.yaw_rad, Frame::Camera)
}

/// Expresses a camera-frame pose in the world frame.
pub fn camera_to_world(pose: &PlanPose, ego_world: &PlanPose) -> PlanPose {
    debug_assert_eq!(pose.frame, Frame::Camera);
    debug_assert_eq!(ego_world.frame, Frame::World);
    let p = ego_world.position() + pose.position().rotated(ego_world.yaw_rad);
    PlanPose::new(p.x, p.y, pose.yaw_rad + ego_world.yaw_rad, Frame::World)
}

fn project_box_to_image(
    cam_pose: &PlanPose,
    dims: &BoxDims,
    intr: &CameraIntrinsics,
) -> (f64, f64, f64, f64) {
    let mut u_min = f64::INFINITY;
    let mut u_max = f64::NEG_INFINITY;
    let mut v_min = f64::INFINITY;
    let mut v_max = f64::NEG_INFINITY;
    for corner in box_corners(cam_pose, dims.length_m, dims.width_m) {
        let depth = corner.y.max(NEAR_PLANE_M);
        let u = intr.image_width_px / 2.0 + intr.focal_length_px * corner.x / depth;
        u_min = u_min.min(u);
        u_max = u_max.max(u);
        for z in [0.0, dims.height_m] {
            let v = intr.image_height_px / 2.0
                - intr.focal_length_px * (z - CAMERA_HEIGHT_M) / depth;
            v_min = v_min.min(v);
            v_max = v_max.max(v);
        }
    }
    (
        u_min.clamp(0.0, intr.image_width_px),
        v_min.clamp(0.0, intr.image_height_px),
        u_max.clamp(0.0, intr.image_width_px),
        v_max.clamp(0.0, intr.image_height_px),
    )
}

/// Projects a world-frame object into the ego camera.
///
/// Returns `None` when the object center is behind the image plane or
/// outside the horizontal field of view (the boundary itself is included).
/// Vertical culling is not applied; boxes are clamped to the image instead.
pub fn project_to_camera(
    class: ObjectClass,
    object_world: &PlanPose,
    dims: &BoxDims,
    ego_world: &PlanPose,
    intr: &CameraIntrinsics,
) -> Option<(Detection2D, Estimate3D)> {
    let cam = world_to_camera(object_world, ego_world);
    let depth = cam.y_m;
    if depth <= 0.0 {
        return None;
    }
    if cam.x_m.atan2(depth).abs() > intr.half_fov_rad() + FOV_EPS_RAD {
        return None;
    }
    let x_off = intr.focal_length_px * cam.x_m / depth;
    let estimate = Estimate3D {
        depth_m: depth,
        local_yaw_rad: global_to_local_yaw(cam.yaw_rad, x_off, intr.focal_length_px),
        length_m: dims.length_m,
        width_m: dims.width_m,
        height_m: dims.height_m,
    };
    let (u_min, v_min, u_max, v_max) = project_box_to_image(&cam, dims, intr);
    let detection = Detection2D {
        object_class: class,
        u_min,
        v_min,
        u_max,
        v_max,
        x_center_offset: x_off,
    };
    Some((detection, estimate))
}

/// Rebuilds a pixel-space detection from a (possibly noisy) 3-D estimate so
/// the detection stays consistent with the plan-view reprojection equations.
pub fn detection_from_estimate(
    class: ObjectClass,
    est: &Estimate3D,
    x_center_offset_px: f64,
    intr: &CameraIntrinsics,
) -> Detection2D {
    let pos = plan_location(est.depth_m, x_center_offset_px, intr.focal_length_px);
    let yaw = local_to_global_yaw(est.local_yaw_rad, x_center_offset_px, intr.focal_length_px);
    let cam_pose = PlanPose::new(pos.x, pos.y, yaw, Frame::Camera);
    let (u_min, v_min, u_max, v_max) = project_box_to_image(&cam_pose, &est.dims(), intr);
    Detection2D {
        object_class: class,
        u_min,
        v_min,
        u_max,
        v_max,
        x_center_offset: x_center_offset_px,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

    #[test]
    fn focal_matches_reference_values() {
        assert_relative_eq!(focal_from_fov(640.0, 60.0).unwrap(), 554.2563, epsilon = 1e-3);
        assert_relative_eq!(focal_from_fov(1920.0, 60.0).unwrap(), 1662.7688, epsilon = 1e-3);
        assert_relative_eq!(focal_from_fov(2.0, 90.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn focal_rejects_bad_inputs() {
        assert!(focal_from_fov(0.0, 60.0).is_err());
        assert!(focal_from_fov(-640.0, 60.0).is_err());
        assert!(focal_from_fov(640.0, 0.0).is_err());
        assert!(focal_from_fov(640.0, 180.0).is_err());
    }

    #[test]
    fn yaw_conversion_reference_cases() {
        let f = 554.2563;
        assert_relative_eq!(local_to_global_yaw(FRAC_PI_4, 0.0, f), FRAC_PI_4);
        // Offset of 320 px at this focal length is a 30-degree bearing, so a
        // local yaw of pi/6 maps to a global yaw of zero (mod 2*pi).
        let wrapped = local_to_global_yaw(FRAC_PI_6, 320.0, f);
        assert!(circular_dist(wrapped, 0.0) < 1e-6);
        assert_relative_eq!(local_to_global_yaw(0.0, f, f), 7.0 * FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn yaw_conversion_round_trips() {
        let f = focal_from_fov(640.0, 60.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let yaw = rng.gen_range(0.0..TAU);
            let x = rng.gen_range(-320.0..320.0);
            let local = global_to_local_yaw(yaw, x, f);
            assert!(circular_dist(local_to_global_yaw(local, x, f), yaw) < 1e-12);
        }
    }

    #[test]
    fn plan_location_reference_cases() {
        let p = plan_location(20.0, -277.1281, 554.2563);
        assert_relative_eq!(p.x, -10.0, epsilon = 1e-4);
        assert_relative_eq!(p.y, 20.0, epsilon = 1e-12);
        let q = plan_location(7.25, 0.0, 554.2563);
        assert_eq!(q, Vec2::new(0.0, 7.25));
    }

    #[test]
    fn box_corners_axis_aligned() {
        let pose = PlanPose::new(0.0, 0.0, 0.0, Frame::Camera);
        let corners = box_corners(&pose, 4.0, 2.0);
        assert_eq!(corners[0], Vec2::new(1.0, 2.0));
        assert_eq!(corners[1], Vec2::new(1.0, -2.0));
        assert_eq!(corners[2], Vec2::new(-1.0, -2.0));
        assert_eq!(corners[3], Vec2::new(-1.0, 2.0));
    }

    #[test]
    fn box_corners_quarter_turn() {
        let pose = PlanPose::new(0.0, 0.0, FRAC_PI_2, Frame::Camera);
        let corners = box_corners(&pose, 4.0, 2.0);
        let expected = [
            Vec2::new(-2.0, 1.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(2.0, -1.0),
            Vec2::new(-2.0, -1.0),
        ];
        for e in expected {
            assert!(
                corners.iter().any(|c| c.dist(e) < 1e-12),
                "missing corner {e:?} in {corners:?}"
            );
        }
    }

    #[test]
    fn to_frame_travel_is_identity_retag() {
        let pose = PlanPose::new(3.0, 14.0, 1.25, Frame::Camera);
        let ego = PlanPose::new(100.0, -5.0, 2.0, Frame::World);
        let out = to_frame(&pose, &ego, ViewFrame::Travel).unwrap();
        assert_eq!(out.frame, Frame::Travel);
        assert_eq!((out.x_m, out.y_m, out.yaw_rad), (pose.x_m, pose.y_m, pose.yaw_rad));
    }

    #[test]
    fn to_frame_north_up_rotates_by_ego_yaw() {
        let pose = PlanPose::new(0.0, 10.0, 0.0, Frame::Camera);
        let ego = PlanPose::new(0.0, 0.0, FRAC_PI_2, Frame::World);
        let out = to_frame(&pose, &ego, ViewFrame::NorthUp).unwrap();
        assert_relative_eq!(out.x_m, -10.0, epsilon = 1e-9);
        assert_relative_eq!(out.y_m, 0.0, epsilon = 1e-9);
        assert_relative_eq!(out.yaw_rad, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn to_frame_rejects_wrong_frames() {
        let pose = PlanPose::new(0.0, 10.0, 0.0, Frame::World);
        let ego = PlanPose::new(0.0, 0.0, 0.0, Frame::World);
        assert!(to_frame(&pose, &ego, ViewFrame::Travel).is_err());
        let pose = PlanPose::new(0.0, 10.0, 0.0, Frame::Camera);
        let ego = PlanPose::new(0.0, 0.0, 0.0, Frame::Camera);
        assert!(to_frame(&pose, &ego, ViewFrame::NorthUp).is_err());
    }

    fn default_dims() -> BoxDims {
        BoxDims::new(4.5, 1.8, 1.5)
    }

    #[test]
    fn project_dead_ahead_object() {
        let intr = CameraIntrinsics::default();
        let ego = PlanPose::new(0.0, 0.0, 0.0, Frame::World);
        let obj = PlanPose::new(0.0, 10.0, 0.0, Frame::World);
        let (det, est) = project_to_camera(ObjectClass::Vehicle, &obj, &default_dims(), &ego, &intr)
            .expect("object straight ahead is visible");
        assert_eq!(det.x_center_offset, 0.0);
        assert_eq!(est.depth_m, 10.0);
        assert_eq!(est.local_yaw_rad, 0.0);
        assert_relative_eq!(
            det.u_min + det.u_max,
            intr.image_width_px,
            epsilon = 1e-9
        );
    }

    #[test]
    fn project_culls_behind_camera() {
        let intr = CameraIntrinsics::default();
        let ego = PlanPose::new(0.0, 0.0, 0.0, Frame::World);
        let obj = PlanPose::new(0.0, -5.0, 0.0, Frame::World);
        assert!(project_to_camera(ObjectClass::Vehicle, &obj, &default_dims(), &ego, &intr).is_none());
    }

    #[test]
    fn fov_boundary_is_inclusive() {
        // At a 90-degree field of view the 45-degree ray is exactly on the
        // boundary: (5, 5) must stay included and lands at x_off = f.
        let intr = CameraIntrinsics::new(640.0, 352.0, 90.0).unwrap();
        let ego = PlanPose::new(0.0, 0.0, 0.0, Frame::World);
        let obj = PlanPose::new(5.0, 5.0, 0.0, Frame::World);
        let (det, _) = project_to_camera(ObjectClass::Vehicle, &obj, &default_dims(), &ego, &intr)
            .expect("45-degree ray is on the 90-degree fov boundary");
        assert_relative_eq!(det.x_center_offset, intr.focal_length_px, epsilon = 1e-9);

        // The same object falls outside a 60-degree field of view.
        let narrow = CameraIntrinsics::default();
        assert!(
            project_to_camera(ObjectClass::Vehicle, &obj, &default_dims(), &ego, &narrow).is_none()
        );

        // An object exactly on the 30-degree ray stays included at 60 degrees.
        let on_edge = PlanPose::new(10.0 * (PI / 6.0).tan(), 10.0, 0.0, Frame::World);
        assert!(
            project_to_camera(ObjectClass::Vehicle, &on_edge, &default_dims(), &ego, &narrow)
                .is_some()
        );
    }

    #[test]
    fn projection_round_trip_recovers_plan_pose() {
        let intr = CameraIntrinsics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let half_fov = intr.half_fov_rad();
        for _ in 0..500 {
            let ego = PlanPose::new(
                rng.gen_range(-100.0..100.0),
                rng.gen_range(-100.0..100.0),
                rng.gen_range(0.0..TAU),
                Frame::World,
            );
            let depth = rng.gen_range(1.0..64.0);
            let bearing = rng.gen_range(-half_fov * 0.999..half_fov * 0.999);
            let cam = PlanPose::new(
                depth * bearing.tan(),
                depth,
                rng.gen_range(0.0..TAU),
                Frame::Camera,
            );
            let obj = camera_to_world(&cam, &ego);
            let (det, est) =
                project_to_camera(ObjectClass::Vehicle, &obj, &default_dims(), &ego, &intr)
                    .expect("constructed object is in view");
            let recovered =
                plan_location(est.depth_m, det.x_center_offset, intr.focal_length_px);
            assert!(recovered.dist(cam.position()) < 1e-9);
            let yaw =
                local_to_global_yaw(est.local_yaw_rad, det.x_center_offset, intr.focal_length_px);
            assert!(circular_dist(yaw, cam.yaw_rad) < 1e-9);
        }
    }

    #[test]
    fn detection_from_estimate_preserves_offset() {
        let intr = CameraIntrinsics::default();
        let est = Estimate3D {
            depth_m: 22.0,
            local_yaw_rad: 0.8,
            length_m: 4.2,
            width_m: 1.8,
            height_m: 1.5,
        };
        let det = detection_from_estimate(ObjectClass::Vehicle, &est, -120.0, &intr);
        assert_eq!(det.x_center_offset, -120.0);
        assert!(det.u_min < det.u_max);
        assert!(det.v_min < det.v_max);
    }

    #[test]
    fn wrap_angle_stays_in_range() {
        for theta in [-TAU, -1e-18, 0.0, 1.0, TAU, TAU + 1.0, 1e9, -1e9] {
            let w = wrap_angle(theta);
            assert!((0.0..TAU).contains(&w), "wrap_angle({theta}) = {w}");
        }
    }
}
