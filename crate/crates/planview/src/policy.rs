//! Driving actions, low-level control mapping, and the plan-view policies:
//! an occupancy-clearance heuristic and a linear scorer over pooled grid
//! features.

use crate::raster::{Channel, PlanViewImage};
use crate::world::EgoControl;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Lateral intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatAction {
    Left,
    Straight,
    Right,
}

/// Longitudinal intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LonAction {
    Fast,
    Slow,
    Stop,
}

/// One of the nine discrete driving commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub lat: LatAction,
    pub lon: LonAction,
}

impl Action {
    pub const COUNT: usize = 9;

    pub const fn new(lat: LatAction, lon: LonAction) -> Action {
        Action { lat, lon }
    }

    /// Dense index: three lateral groups of three longitudinal commands.
    pub fn index(self) -> usize {
        let lat = match self.lat {
            LatAction::Left => 0,
            LatAction::Straight => 1,
            LatAction::Right => 2,
        };
        let lon = match self.lon {
            LonAction::Fast => 0,
            LonAction::Slow => 1,
            LonAction::Stop => 2,
        };
        lat * 3 + lon
    }

    pub fn from_index(index: usize) -> Option<Action> {
        if index >= Action::COUNT {
            return None;
        }
        let lat = [LatAction::Left, LatAction::Straight, LatAction::Right][index / 3];
        let lon = [LonAction::Fast, LonAction::Slow, LonAction::Stop][index % 3];
        Some(Action { lat, lon })
    }

    pub fn all() -> [Action; Action::COUNT] {
        core::array::from_fn(|i| Action::from_index(i).unwrap())
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lat = match self.lat {
            LatAction::Left => "left",
            LatAction::Straight => "straight",
            LatAction::Right => "right",
        };
        let lon = match self.lon {
            LonAction::Fast => "fast",
            LonAction::Slow => "slow",
            LonAction::Stop => "stop",
        };
        write!(f, "{lat}-{lon}")
    }
}

/// Gains for turning a discrete action into pedal and wheel commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub fast_mps: f64,
    pub slow_mps: f64,
    pub throttle_kp: f64,
    pub brake_kp: f64,
    pub steer_magnitude: f64,
    /// Above this speed a stop command brakes fully.
    pub hard_brake_above_mps: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            fast_mps: 12.0,
            slow_mps: 5.0,
            throttle_kp: 0.25,
            brake_kp: 0.5,
            steer_magnitude: 0.5,
            hard_brake_above_mps: 2.0,
        }
    }
}

/// Proportional speed tracking plus a fixed steering offset per lateral
/// intent. Stop commands above the hard-brake speed brake fully.
pub fn pid_control(action: Action, speed_mps: f64, params: &ControlParams) -> EgoControl {
    let target = match action.lon {
        LonAction::Fast => params.fast_mps,
        LonAction::Slow => params.slow_mps,
        LonAction::Stop => 0.0,
    };
    let err = target - speed_mps;
    let throttle = (params.throttle_kp * err).clamp(0.0, 1.0);
    let mut brake = (-params.brake_kp * err).clamp(0.0, 1.0);
    if action.lon == LonAction::Stop && speed_mps > params.hard_brake_above_mps {
        brake = 1.0;
    }
    let steer = match action.lat {
        LatAction::Left => -params.steer_magnitude,
        LatAction::Straight => 0.0,
        LatAction::Right => params.steer_magnitude,
    };
    EgoControl::new(throttle, brake, steer)
}

/// Tuning for the occupancy-clearance heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyParams {
    /// Arc curvature probed for the left and right intents.
    pub curvature: f64,
    /// Probe corridor width in meters.
    pub corridor_width_m: f64,
    /// Farthest probed arc length.
    pub horizon_m: f64,
    /// Sampling step along and across the arc.
    pub step_m: f64,
    /// Clearance below which the policy stops.
    pub stop_below_m: f64,
    /// Clearance below which the policy slows.
    pub slow_below_m: f64,
}

impl Default for OccupancyParams {
    fn default() -> Self {
        OccupancyParams {
            curvature: 0.05,
            corridor_width_m: 3.0,
            horizon_m: 24.0,
            step_m: 0.0625,
            stop_below_m: 8.0,
            slow_below_m: 16.0,
        }
    }
}

fn probe_occupied(img: &PlanViewImage, p: crate::geometry::Vec2) -> bool {
    let Some((row, col)) = img.spec().cell_of(p) else {
        return false;
    };
    [Channel::Vehicles, Channel::Pedestrians]
        .into_iter()
        .any(|c| img.cell(c, row, col) == Some(1))
}

/// Arc length until the first occupied probe along one candidate arc:
/// straight ahead for zero curvature, bending toward negative x for
/// positive `bend_left`.
fn arc_clearance(img: &PlanViewImage, params: &OccupancyParams, curvature: f64) -> f64 {
    let half = params.corridor_width_m / 2.0;
    let offsets: Vec<f64> = {
        let n = (half / params.step_m).round() as i32;
        (-n..=n).map(|i| i as f64 * params.step_m).collect()
    };
    let mut s = params.step_m;
    while s <= params.horizon_m {
        let (point, tangent) = if curvature == 0.0 {
            (crate::geometry::Vec2::new(0.0, s), crate::geometry::Vec2::new(0.0, 1.0))
        } else {
            let k = curvature;
            let x = (1.0 - (k.abs() * s).cos()) / k.abs() * -k.signum();
            let y = (k.abs() * s).sin() / k.abs();
            let tx = -(k.abs() * s).sin() * -k.signum();
            let ty = (k.abs() * s).cos();
            (crate::geometry::Vec2::new(x, y), crate::geometry::Vec2::new(tx, ty))
        };
        let normal = tangent.perp();
        for &off in &offsets {
            if probe_occupied(img, point + normal * off) {
                return s - params.step_m;
            }
        }
        s += params.step_m;
    }
    params.horizon_m
}

/// Picks the clearest of three constant-curvature arcs over the vehicle
/// and pedestrian channels of a travel-frame grid, preferring straight,
/// then left, on ties, and slowing or stopping as clearance shrinks.
pub fn occupancy_policy(img: &PlanViewImage, params: &OccupancyParams) -> Action {
    debug_assert_eq!(img.spec().frame, crate::geometry::ViewFrame::Travel);
    let candidates = [
        (LatAction::Straight, 0.0),
        (LatAction::Left, params.curvature),
        (LatAction::Right, -params.curvature),
    ];
    let mut best = (LatAction::Straight, f64::NEG_INFINITY);
    for (lat, curve) in candidates {
        let d = arc_clearance(img, params, curve);
        if d > best.1 {
            best = (lat, d);
        }
    }
    let (lat, clearance) = best;
    let lon = if clearance < params.stop_below_m {
        LonAction::Stop
    } else if clearance < params.slow_below_m {
        LonAction::Slow
    } else {
        LonAction::Fast
    };
    Action { lat, lon }
}

/// Pooled output side length: every channel becomes a 16x16 average grid.
pub const POOL_SIDE: usize = 16;

/// Feature length for a grid with `channels` rendered layers.
pub fn feature_len(channels: usize) -> usize {
    channels * POOL_SIDE * POOL_SIDE + 3
}

/// Flattens a plan-view image into a feature vector: each present channel
/// average-pooled to 16x16 in fixed channel order, then normalized speed,
/// yaw rate, and a constant bias term.
pub fn featurize(img: &PlanViewImage, speed_mps: f64, yaw_rate: f64) -> Vec<f64> {
    let spec = img.spec();
    let (w, h) = (spec.width_px as usize, spec.height_px as usize);
    assert!(
        w % POOL_SIDE == 0 && h % POOL_SIDE == 0,
        "grid {w}x{h} does not pool evenly into {POOL_SIDE}x{POOL_SIDE}"
    );
    let (bw, bh) = (w / POOL_SIDE, h / POOL_SIDE);
    let block_area = (bw * bh) as f64;
    let mut out = Vec::new();
    for channel in Channel::ALL {
        let Some(cells) = img.channel(channel) else {
            continue;
        };
        for br in 0..POOL_SIDE {
            for bc in 0..POOL_SIDE {
                let mut sum = 0u32;
                for r in br * bh..(br + 1) * bh {
                    let row = &cells[r * w + bc * bw..r * w + (bc + 1) * bw];
                    sum += row.iter().map(|&v| v as u32).sum::<u32>();
                }
                out.push(sum as f64 / block_area);
            }
        }
    }
    out.push(speed_mps / 30.0);
    out.push(yaw_rate);
    out.push(1.0);
    out
}

const WEIGHTS_MAGIC: &[u8; 4] = b"MPVW";
const WEIGHTS_MAX_CELLS: u64 = 2_000_000;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("weights file does not start with the MPVW magic")]
    BadMagic,
    #[error("weights file truncated: {got} bytes, need at least {need}")]
    Truncated { got: usize, need: usize },
    #[error("weight matrix {rows}x{cols} is degenerate or too large")]
    BadShape { rows: u32, cols: u32 },
    #[error("payload holds {got} bytes but {rows}x{cols} needs {need}")]
    SizeMismatch { rows: u32, cols: u32, need: u64, got: usize },
    #[error("weight {index} is not finite")]
    NotFinite { index: usize },
    #[error("feature length {got} does not match weight columns {cols}")]
    FeatureLength { cols: u32, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major linear scorer: one row of weights per action.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicyWeights {
    pub rows: u32,
    pub cols: u32,
    pub w: Vec<f64>,
}

impl LinearPolicyWeights {
    pub fn zeros(rows: u32, cols: u32) -> LinearPolicyWeights {
        LinearPolicyWeights { rows, cols, w: vec![0.0; rows as usize * cols as usize] }
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>, WeightsError> {
        if features.len() != self.cols as usize {
            return Err(WeightsError::FeatureLength { cols: self.cols, got: features.len() });
        }
        let cols = self.cols as usize;
        Ok((0..self.rows as usize)
            .map(|r| {
                self.w[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(features)
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
            })
            .collect())
    }

    /// Highest-logit action; the lowest index wins ties.
    pub fn predict(&self, features: &[f64]) -> Result<Action, WeightsError> {
        let logits = self.logits(features)?;
        let best = argmax_lowest(&logits);
        Ok(Action::from_index(best).expect("row count checked at construction"))
    }

    /// Binary layout: magic, little-endian u32 rows and cols, then
    /// row-major little-endian f64 weights.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.w.len());
        out.extend_from_slice(WEIGHTS_MAGIC);
        out.extend_from_slice(&self.rows.to_le_bytes());
        out.extend_from_slice(&self.cols.to_le_bytes());
        for v in &self.w {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Validating decoder: checks magic, shape sanity, exact payload size,
    /// and that every weight is finite.
    pub fn decode(bytes: &[u8]) -> Result<LinearPolicyWeights, WeightsError> {
        if bytes.len() < 12 {
            return Err(WeightsError::Truncated { got: bytes.len(), need: 12 });
        }
        if &bytes[..4] != WEIGHTS_MAGIC {
            return Err(WeightsError::BadMagic);
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let cells = rows as u64 * cols as u64;
        if rows == 0 || cols == 0 || cells > WEIGHTS_MAX_CELLS {
            return Err(WeightsError::BadShape { rows, cols });
        }
        let need = cells * 8;
        let payload = &bytes[12..];
        if payload.len() as u64 != need {
            return Err(WeightsError::SizeMismatch { rows, cols, need, got: payload.len() });
        }
        let mut w = Vec::with_capacity(cells as usize);
        for (i, chunk) in payload.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(WeightsError::NotFinite { index: i });
            }
            w.push(v);
        }
        Ok(LinearPolicyWeights { rows, cols, w })
    }

    pub fn save(&self, path: &Path) -> Result<(), WeightsError> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LinearPolicyWeights, WeightsError> {
        let bytes = std::fs::read(path)?;
        LinearPolicyWeights::decode(&bytes)
    }
}

/// Index of the maximum value; the lowest index wins ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
