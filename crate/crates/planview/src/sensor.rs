//! Synthetic monocular perception: projects true actor states into the
//! camera, then corrupts them with a per-class noise model of misses,
//! multiplicative depth error, von Mises yaw error, and multiplicative
//! per-dimension size error. Noise magnitudes are found by calibrating
//! against target error statistics.

use crate::geometry::{
    detection_from_estimate, project_to_camera, wrap_angle, CameraIntrinsics, Detection2D,
    Estimate3D, ObjectClass,
};
use crate::world::WorldState;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rand::SeedableRng;
use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

/// Monte Carlo sample count used by calibration.
pub const CALIBRATION_SAMPLES: usize = 100_000;
/// Bisection iteration cap.
const CALIBRATION_ITERS: usize = 60;
/// Required agreement between the achieved statistic and its target.
const CALIBRATION_TOL: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("no {parameter} reaches {statistic} = {target} (best achieved {achieved})")]
    UnreachableTarget { parameter: &'static str, statistic: &'static str, target: f64, achieved: f64 },
}

/// Noise magnitudes for one object class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassNoise {
    /// Probability that a visible object produces no detection.
    pub miss_rate: f64,
    /// Sigma of the multiplicative log-normal depth error.
    pub depth_sigma: f64,
    /// Concentration of the von Mises yaw error; infinite means exact.
    pub yaw_kappa: f64,
    /// Sigma of the multiplicative log-normal error on each dimension.
    pub dim_sigma: f64,
}

/// Per-class noise for the full sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProfile {
    pub vehicle: ClassNoise,
    pub pedestrian: ClassNoise,
}

impl NoiseProfile {
    pub fn for_class(&self, class: ObjectClass) -> &ClassNoise {
        match class {
            ObjectClass::Vehicle => &self.vehicle,
            ObjectClass::Pedestrian => &self.pedestrian,
        }
    }

    /// A noiseless sensor that sees everything exactly.
    pub fn exact() -> NoiseProfile {
        let none =
            ClassNoise { miss_rate: 0.0, depth_sigma: 0.0, yaw_kappa: f64::INFINITY, dim_sigma: 0.0 };
        NoiseProfile { vehicle: none, pedestrian: none }
    }
}

/// Error statistics a calibrated class must reproduce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassTargets {
    /// Mean absolute relative depth error.
    pub depth_abs_rel: f64,
    /// Mean orientation similarity `(1 + cos d_yaw) / 2`.
    pub orientation_score: f64,
    /// Mean volume ratio `min(v_est / v_true, v_true / v_est)`.
    pub dim_score: f64,
}

/// Calibration targets for both classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    pub vehicle: ClassTargets,
    pub pedestrian: ClassTargets,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            vehicle: ClassTargets {
                depth_abs_rel: 0.102,
                orientation_score: 0.945,
                dim_score: 0.889,
            },
            pedestrian: ClassTargets {
                depth_abs_rel: 0.059,
                orientation_score: 0.873,
                dim_score: 0.968,
            },
        }
    }
}

/// Default miss rates: pedestrians are dropped more often than vehicles.
pub const VEHICLE_MISS_RATE: f64 = 0.03;
pub const PEDESTRIAN_MISS_RATE: f64 = 0.05;

/// Seed for the cached default profile calibration.
const DEFAULT_CALIBRATION_SEED: u64 = 17;

/// The profile calibrated to the default targets, computed once.
pub fn default_profile() -> &'static NoiseProfile {
    static PROFILE: OnceLock<NoiseProfile> = OnceLock::new();
    PROFILE.get_or_init(|| {
        calibrate(&CalibrationTargets::default(), DEFAULT_CALIBRATION_SEED)
            .expect("default calibration targets are reachable")
    })
}

/// One perceived object: the noisy screen detection, the noisy 3D
/// estimate, and (for evaluation) the ground truth it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensedObject {
    pub actor_id: u32,
    pub class: ObjectClass,
    pub detection: Detection2D,
    pub estimate: Estimate3D,
    pub truth: Estimate3D,
}

/// Runs the sensor over every actor in ascending id order. Objects behind
/// the camera or outside the field of view never appear; visible objects
/// are dropped at the class miss rate. Per detected object the draw order
/// is fixed: miss test, depth, yaw, then length, width, height.
pub fn sense<R: Rng>(
    world: &WorldState,
    intrinsics: &CameraIntrinsics,
    profile: &NoiseProfile,
    rng: &mut R,
) -> Vec<SensedObject> {
    let mut order: Vec<usize> = (0..world.actors.len()).collect();
    order.sort_by_key(|&i| world.actors[i].id);
    let mut out = Vec::new();
    for i in order {
        let actor = &world.actors[i];
        let Some((true_detection, truth)) =
            project_to_camera(actor.class, &actor.pose, &actor.dims, &world.ego.pose, intrinsics)
        else {
            continue;
        };
        let noise = profile.for_class(actor.class);
        if rng.gen::<f64>() < noise.miss_rate {
            continue;
        }
        let depth_m = truth.depth_m * lognormal_factor(rng, noise.depth_sigma);
        let local_yaw_rad = wrap_angle(truth.local_yaw_rad + von_mises_sample(rng, noise.yaw_kappa));
        let length_m = truth.length_m * lognormal_factor(rng, noise.dim_sigma);
        let width_m = truth.width_m * lognormal_factor(rng, noise.dim_sigma);
        let height_m = truth.height_m * lognormal_factor(rng, noise.dim_sigma);
        let estimate = Estimate3D { depth_m, local_yaw_rad, length_m, width_m, height_m };
        let detection = detection_from_estimate(
            actor.class,
            &estimate,
            true_detection.x_center_offset,
            intrinsics,
        );
        out.push(SensedObject { actor_id: actor.id, class: actor.class, detection, estimate, truth });
    }
    out
}

fn lognormal_factor<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (sigma * z).exp()
}

/// Draws from a zero-centered von Mises distribution by Best-Fisher
/// rejection. Tiny concentrations fall back to the uniform circle and an
/// infinite concentration returns exactly zero.
pub fn von_mises_sample<R: Rng>(rng: &mut R, kappa: f64) -> f64 {
    if kappa.is_infinite() {
        return 0.0;
    }
    if kappa < 1e-10 {
        return rng.gen_range(-PI..PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.gen();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.gen();
            return if u3 > 0.5 { f.acos() } else { -f.acos() };
        }
    }
}

/// Calibrates both classes at their default miss rates.
pub fn calibrate(targets: &CalibrationTargets, seed: u64) -> Result<NoiseProfile, SensorError> {
    Ok(NoiseProfile {
        vehicle: calibrate_class(&targets.vehicle, VEHICLE_MISS_RATE, seed)?,
        pedestrian: calibrate_class(&targets.pedestrian, PEDESTRIAN_MISS_RATE, seed ^ 0x9E37_79B9)?,
    })
}

/// Finds noise magnitudes that reproduce the target statistics, each by
/// one-dimensional bisection over a Monte Carlo estimate of the statistic.
/// Depth and dimension objectives reuse one set of normal draws so the
/// objective is smooth in sigma; the yaw objective replays the same seed
/// for every candidate concentration.
pub fn calibrate_class(
    targets: &ClassTargets,
    miss_rate: f64,
    seed: u64,
) -> Result<ClassNoise, SensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals: Vec<f64> =
        (0..CALIBRATION_SAMPLES).map(|_| StandardNormal.sample(&mut rng)).collect();
    let triple_sums: Vec<f64> = (0..CALIBRATION_SAMPLES)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let c: f64 = StandardNormal.sample(&mut rng);
            (a + b + c).abs()
        })
        .collect();
    let yaw_seed = rng.gen::<u64>();

    let depth_sigma = if targets.depth_abs_rel <= 0.0 {
        0.0
    } else {
        let eval = |sigma: f64| {
            normals.iter().map(|&z| ((sigma * z).exp() - 1.0).abs()).sum::<f64>()
                / normals.len() as f64
        };
        bisect("depth_sigma", "depth_abs_rel", 0.0, 4.0, targets.depth_abs_rel, true, eval)?
    };

    let yaw_kappa = if targets.orientation_score >= 1.0 - 1e-9 {
        f64::INFINITY
    } else {
        let eval = |log_kappa: f64| {
            let kappa = log_kappa.exp();
            let mut rng = ChaCha8Rng::seed_from_u64(yaw_seed);
            let mut acc = 0.0;
            for _ in 0..CALIBRATION_SAMPLES {
                acc += (1.0 + von_mises_sample(&mut rng, kappa).cos()) / 2.0;
            }
            acc / CALIBRATION_SAMPLES as f64
        };
        let log_kappa = bisect(
            "yaw_kappa",
            "orientation_score",
            (1e-4f64).ln(),
            (1e4f64).ln(),
            targets.orientation_score,
            true,
            eval,
        )?;
        log_kappa.exp()
    };

    let dim_sigma = if targets.dim_score >= 1.0 - 1e-9 {
        0.0
    } else {
        let eval = |sigma: f64| {
            triple_sums.iter().map(|&s| (-sigma * s).exp()).sum::<f64>()
                / triple_sums.len() as f64
        };
        bisect("dim_sigma", "dim_score", 0.0, 4.0, targets.dim_score, false, eval)?
    };

    Ok(ClassNoise { miss_rate, depth_sigma, yaw_kappa, dim_sigma })
}

/// Bisects `eval` over `[lo, hi]` for `eval(x) = target`, treating `eval`
/// as increasing when `rising`. Fails when the bracket cannot reach the
/// target or the final statistic misses it by more than the tolerance.
fn bisect(
    parameter: &'static str,
    statistic: &'static str,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    rising: bool,
    eval: impl Fn(f64) -> f64,
) -> Result<f64, SensorError> {
    let unreachable = |achieved: f64| SensorError::UnreachableTarget {
        parameter,
        statistic,
        target,
        achieved,
    };
    let f_lo = eval(lo);
    let f_hi = eval(hi);
    let (f_min, f_max) = if rising { (f_lo, f_hi) } else { (f_hi, f_lo) };
    if target < f_min - CALIBRATION_TOL || target > f_max + CALIBRATION_TOL {
        let achieved = if target < f_min - CALIBRATION_TOL { f_min } else { f_max };
        return Err(unreachable(achieved));
    }
    let mut mid = 0.5 * (lo + hi);
    let mut f_mid = eval(mid);
    for _ in 0..CALIBRATION_ITERS {
        mid = 0.5 * (lo + hi);
        f_mid = eval(mid);
        let go_up = if rising { f_mid < target } else { f_mid > target };
        if go_up {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (f_mid - target).abs() > CALIBRATION_TOL {
        return Err(unreachable(f_mid));
    }
    Ok(mid)
}
