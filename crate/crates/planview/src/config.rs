//! Flat text configuration: `namespace.key = value` lines with `#`
//! comments. Values layer on top of built-in defaults, first from the file
//! named by the `MPV_CONFIG` environment variable, then an explicit config
//! file, then individual command-line overrides.

use crate::geometry::CameraIntrinsics;
use crate::policy::{ControlParams, OccupancyParams, POOL_SIDE};
use crate::raster::{GridSpec, LayerSet};
use crate::geometry::ViewFrame;
use crate::sensor::{default_profile, ClassNoise, NoiseProfile};
use crate::world::SimParams;
use std::path::Path;
use thiserror::Error;

/// Environment variable naming a config file to load before any explicit
/// one.
pub const CONFIG_ENV: &str = "MPV_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}: {reason}")]
    BadValue { line: usize, key: String, value: String, reason: String },
}

/// Optional per-class noise overrides; unset fields fall back to the
/// calibrated default profile.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorOverrides {
    pub vehicle_miss_rate: Option<f64>,
    pub vehicle_depth_sigma: Option<f64>,
    pub vehicle_yaw_kappa: Option<f64>,
    pub vehicle_dim_sigma: Option<f64>,
    pub pedestrian_miss_rate: Option<f64>,
    pub pedestrian_depth_sigma: Option<f64>,
    pub pedestrian_yaw_kappa: Option<f64>,
    pub pedestrian_dim_sigma: Option<f64>,
}

impl SensorOverrides {
    fn is_empty(&self) -> bool {
        *self == SensorOverrides::default()
    }

    fn apply(&self, base: NoiseProfile) -> NoiseProfile {
        let class = |base: ClassNoise,
                     miss: Option<f64>,
                     depth: Option<f64>,
                     kappa: Option<f64>,
                     dim: Option<f64>| ClassNoise {
            miss_rate: miss.unwrap_or(base.miss_rate),
            depth_sigma: depth.unwrap_or(base.depth_sigma),
            yaw_kappa: kappa.unwrap_or(base.yaw_kappa),
            dim_sigma: dim.unwrap_or(base.dim_sigma),
        };
        NoiseProfile {
            vehicle: class(
                base.vehicle,
                self.vehicle_miss_rate,
                self.vehicle_depth_sigma,
                self.vehicle_yaw_kappa,
                self.vehicle_dim_sigma,
            ),
            pedestrian: class(
                base.pedestrian,
                self.pedestrian_miss_rate,
                self.pedestrian_depth_sigma,
                self.pedestrian_yaw_kappa,
                self.pedestrian_dim_sigma,
            ),
        }
    }
}

/// Every tunable the command-line tool honors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub sim: SimParams,
    pub camera: CameraIntrinsics,
    pub control: ControlParams,
    pub occupancy: OccupancyParams,
    pub raster_width_px: u32,
    pub raster_height_px: u32,
    pub raster_meters_per_px: f64,
    pub sensor: SensorOverrides,
}

impl Default for Config {
    fn default() -> Self {
        let grid = GridSpec::default();
        Config {
            sim: SimParams::default(),
            camera: CameraIntrinsics::default(),
            control: ControlParams::default(),
            occupancy: OccupancyParams::default(),
            raster_width_px: grid.width_px,
            raster_height_px: grid.height_px,
            raster_meters_per_px: grid.meters_per_px,
            sensor: SensorOverrides::default(),
        }
    }
}

impl Config {
    /// Parses a whole config text on top of defaults.
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut config = Config::default();
        config.apply_text(text)?;
        Ok(config)
    }

    /// Applies every assignment in `text`. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) =
                trimmed.split_once('=').ok_or(ConfigError::Syntax { line })?;
            self.apply_kv(key.trim(), value.trim(), line)?;
        }
        Ok(())
    }

    /// Applies one `key = value` assignment; `line` only labels errors.
    pub fn apply_kv(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        let float = || value.parse::<f64>().map_err(|_| bad("not a number"));
        let finite = || {
            let v = float()?;
            if v.is_finite() { Ok(v) } else { Err(bad("must be finite")) }
        };
        let nonneg = || {
            let v = finite()?;
            if v >= 0.0 { Ok(v) } else { Err(bad("must be nonnegative")) }
        };
        let positive = || {
            let v = finite()?;
            if v > 0.0 { Ok(v) } else { Err(bad("must be positive")) }
        };
        let unit = || {
            let v = finite()?;
            if (0.0..=1.0).contains(&v) { Ok(v) } else { Err(bad("must be in [0, 1]")) }
        };
        let kappa = || {
            let v = float()?;
            if v >= 0.0 { Ok(v) } else { Err(bad("must be nonnegative or inf")) }
        };
        let grid_px = || {
            let v = value.parse::<u32>().map_err(|_| bad("not a whole number"))?;
            if v == 0 || v as usize % POOL_SIDE != 0 {
                return Err(bad("must be a positive multiple of 16"));
            }
            Ok(v)
        };

        match key {
            "sim.fps" => {
                let v = value.parse::<u32>().map_err(|_| bad("not a whole number"))?;
                if v == 0 {
                    return Err(bad("must be positive"));
                }
                self.sim.fps = v;
            }
            "sim.wheelbase_m" => self.sim.wheelbase_m = positive()?,
            "sim.max_steer_deg" => {
                let v = positive()?;
                if v >= 90.0 {
                    return Err(bad("must be below 90"));
                }
                self.sim.max_steer_deg = v;
            }
            "sim.max_speed_mps" => self.sim.max_speed_mps = positive()?,
            "sim.throttle_gain" => self.sim.throttle_gain = positive()?,
            "sim.brake_gain" => self.sim.brake_gain = positive()?,
            "sim.drag_coeff" => self.sim.drag_coeff = nonneg()?,
            "sim.npc_headway_s" => self.sim.npc_headway_s = positive()?,
            "sim.npc_accel_cap" => self.sim.npc_accel_cap = positive()?,
            "sim.npc_decel_cap" => self.sim.npc_decel_cap = positive()?,
            "sim.npc_stop_gap_m" => self.sim.npc_stop_gap_m = nonneg()?,
            "sim.npc_brake_margin" => {
                let v = unit()?;
                if v == 0.0 {
                    return Err(bad("must be positive"));
                }
                self.sim.npc_brake_margin = v;
            }
            "sim.junction_wait_timeout_s" => self.sim.junction_wait_timeout_s = nonneg()?,
            "sim.stuck_window_s" => self.sim.stuck_window_s = positive()?,
            "sim.stuck_displacement_m" => self.sim.stuck_displacement_m = positive()?,

            "sensor.image_width_px" | "sensor.image_height_px" | "sensor.hfov_deg" => {
                let v = positive()?;
                let (mut w, mut h, mut fov) =
                    (self.camera.image_width_px, self.camera.image_height_px, self.camera.hfov_deg);
                match key {
                    "sensor.image_width_px" => w = v,
                    "sensor.image_height_px" => h = v,
                    _ => fov = v,
                }
                self.camera =
                    CameraIntrinsics::new(w, h, fov).map_err(|e| bad(&e.to_string()))?;
            }
            "sensor.vehicle_miss_rate" => self.sensor.vehicle_miss_rate = Some(unit()?),
            "sensor.vehicle_depth_sigma" => self.sensor.vehicle_depth_sigma = Some(nonneg()?),
            "sensor.vehicle_yaw_kappa" => self.sensor.vehicle_yaw_kappa = Some(kappa()?),
            "sensor.vehicle_dim_sigma" => self.sensor.vehicle_dim_sigma = Some(nonneg()?),
            "sensor.pedestrian_miss_rate" => self.sensor.pedestrian_miss_rate = Some(unit()?),
            "sensor.pedestrian_depth_sigma" => {
                self.sensor.pedestrian_depth_sigma = Some(nonneg()?)
            }
            "sensor.pedestrian_yaw_kappa" => self.sensor.pedestrian_yaw_kappa = Some(kappa()?),
            "sensor.pedestrian_dim_sigma" => self.sensor.pedestrian_dim_sigma = Some(nonneg()?),

            "policy.fast_mps" => self.control.fast_mps = positive()?,
            "policy.slow_mps" => self.control.slow_mps = positive()?,
            "policy.throttle_kp" => self.control.throttle_kp = positive()?,
            "policy.brake_kp" => self.control.brake_kp = positive()?,
            "policy.steer_magnitude" => {
                let v = unit()?;
                if v == 0.0 {
                    return Err(bad("must be positive"));
                }
                self.control.steer_magnitude = v;
            }
            "policy.hard_brake_above_mps" => self.control.hard_brake_above_mps = nonneg()?,
            "policy.curvature" => self.occupancy.curvature = positive()?,
            "policy.corridor_width_m" => self.occupancy.corridor_width_m = positive()?,
            "policy.horizon_m" => self.occupancy.horizon_m = positive()?,
            "policy.step_m" => self.occupancy.step_m = positive()?,
            "policy.stop_below_m" => self.occupancy.stop_below_m = nonneg()?,
            "policy.slow_below_m" => self.occupancy.slow_below_m = nonneg()?,

            "raster.width_px" => self.raster_width_px = grid_px()?,
            "raster.height_px" => self.raster_height_px = grid_px()?,
            "raster.meters_per_px" => self.raster_meters_per_px = positive()?,

            _ => {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    /// Layers config sources: defaults, then the `MPV_CONFIG` file, then an
    /// explicit file, then `key=value` override strings.
    pub fn resolve(cli_path: Option<&Path>, sets: &[String]) -> Result<Config, ConfigError> {
        let env_path = std::env::var_os(CONFIG_ENV).map(std::path::PathBuf::from);
        Config::resolve_from(env_path.as_deref(), cli_path, sets)
    }

    /// [`Config::resolve`] with the environment already read, for tests.
    pub fn resolve_from(
        env_path: Option<&Path>,
        cli_path: Option<&Path>,
        sets: &[String],
    ) -> Result<Config, ConfigError> {
        let mut config = Config::default();
        if let Some(p) = env_path {
            config.apply_text(&std::fs::read_to_string(p)?)?;
        }
        if let Some(p) = cli_path {
            config.apply_text(&std::fs::read_to_string(p)?)?;
        }
        for (i, set) in sets.iter().enumerate() {
            let line = i + 1;
            let (key, value) = set.split_once('=').ok_or(ConfigError::Syntax { line })?;
            config.apply_kv(key.trim(), value.trim(), line)?;
        }
        Ok(config)
    }

    /// Grid geometry with the caller's frame and layer choices.
    pub fn grid_spec(&self, frame: ViewFrame, layers: LayerSet) -> GridSpec {
        GridSpec {
            width_px: self.raster_width_px,
            height_px: self.raster_height_px,
            meters_per_px: self.raster_meters_per_px,
            frame,
            layers,
        }
    }

    /// Feature extraction settings on this config's grid geometry.
    pub fn feature_config(
        &self,
        view: ViewFrame,
        map: bool,
        history: bool,
        blind: bool,
    ) -> crate::imitation::FeatureConfig {
        crate::imitation::FeatureConfig {
            view,
            map,
            history,
            blind,
            width_px: self.raster_width_px,
            height_px: self.raster_height_px,
            meters_per_px: self.raster_meters_per_px,
        }
    }

    /// Rollout settings carrying this config's physics, sensor, and
    /// geometry choices.
    pub fn bench_options(&self, rollouts: u64, steps: u64, seed: u64) -> crate::bench::BenchOptions {
        crate::bench::BenchOptions {
            rollouts,
            steps,
            seed,
            params: self.sim,
            profile: self.noise_profile(),
            camera: self.camera,
            control: self.control,
            occupancy: self.occupancy,
            grid: self.grid_spec(ViewFrame::Travel, LayerSet::default()),
        }
    }

    /// Collection settings carrying this config's physics and controls.
    pub fn collect_options(&self, steps: u64, noise_period_s: f64) -> crate::imitation::CollectOptions {
        crate::imitation::CollectOptions {
            steps,
            noise_period_s,
            params: self.sim,
            control: self.control,
        }
    }

    /// The sensor profile: the calibrated default with any overrides
    /// applied. Calibration only runs when some field is left unset.
    pub fn noise_profile(&self) -> NoiseProfile {
        if self.sensor.is_empty() {
            return *default_profile();
        }
        let all_set = self.sensor.vehicle_miss_rate.is_some()
            && self.sensor.vehicle_depth_sigma.is_some()
            && self.sensor.vehicle_yaw_kappa.is_some()
            && self.sensor.vehicle_dim_sigma.is_some()
            && self.sensor.pedestrian_miss_rate.is_some()
            && self.sensor.pedestrian_depth_sigma.is_some()
            && self.sensor.pedestrian_yaw_kappa.is_some()
            && self.sensor.pedestrian_dim_sigma.is_some();
        let zero = ClassNoise { miss_rate: 0.0, depth_sigma: 0.0, yaw_kappa: 0.0, dim_sigma: 0.0 };
        let base = if all_set {
            NoiseProfile { vehicle: zero, pedestrian: zero }
        } else {
            *default_profile()
        };
        self.sensor.apply(base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_text_yields_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
        assert_eq!(Config::parse("\n  \n# comment\n").unwrap(), Config::default());
    }

    #[test]
    fn sample_file_sets_keys_in_every_namespace() {
        let text = "\
# tuned run
sim.fps = 24
sim.max_speed_mps = 20.5
sensor.hfov_deg = 90
sensor.vehicle_depth_sigma = 0.2
policy.fast_mps = 10
policy.horizon_m = 30
raster.width_px = 256
raster.meters_per_px = 0.25
";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.sim.fps, 24);
        assert_relative_eq!(c.sim.max_speed_mps, 20.5);
        assert_relative_eq!(c.camera.hfov_deg, 90.0);
        assert_relative_eq!(c.camera.focal_length_px, 320.0, epsilon = 1e-12);
        assert_eq!(c.sensor.vehicle_depth_sigma, Some(0.2));
        assert_relative_eq!(c.control.fast_mps, 10.0);
        assert_relative_eq!(c.occupancy.horizon_m, 30.0);
        assert_eq!(c.raster_width_px, 256);
        assert_relative_eq!(c.raster_meters_per_px, 0.25);
        // untouched namespaces keep defaults
        assert_eq!(c.raster_height_px, 512);
        assert_relative_eq!(c.sim.wheelbase_m, 2.7);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(
            Config::parse("sim.fps = 12\nnope"),
            Err(ConfigError::Syntax { line: 2 })
        ));
        assert!(matches!(
            Config::parse("\n\nsim.warp = 9"),
            Err(ConfigError::UnknownKey { line: 3, .. })
        ));
        assert!(matches!(
            Config::parse("sim.fps = fast"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
        assert!(matches!(
            Config::parse("sim.wheelbase_m = -1"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
        assert!(matches!(
            Config::parse("sensor.vehicle_miss_rate = 1.5"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
        assert!(matches!(
            Config::parse("raster.width_px = 100"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
        assert!(matches!(
            Config::parse("sensor.hfov_deg = 200"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
    }

    #[test]
    fn kappa_accepts_infinity() {
        let c = Config::parse("sensor.vehicle_yaw_kappa = inf").unwrap();
        assert_eq!(c.sensor.vehicle_yaw_kappa, Some(f64::INFINITY));
    }

    #[test]
    fn fully_specified_sensor_skips_calibration() {
        let text = "\
sensor.vehicle_miss_rate = 0
sensor.vehicle_depth_sigma = 0.1
sensor.vehicle_yaw_kappa = 5
sensor.vehicle_dim_sigma = 0.05
sensor.pedestrian_miss_rate = 0
sensor.pedestrian_depth_sigma = 0.2
sensor.pedestrian_yaw_kappa = 2
sensor.pedestrian_dim_sigma = 0.01
";
        let c = Config::parse(text).unwrap();
        let p = c.noise_profile();
        assert_relative_eq!(p.vehicle.depth_sigma, 0.1);
        assert_relative_eq!(p.pedestrian.yaw_kappa, 2.0);
    }

    #[test]
    fn resolution_layers_files_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let env_file = dir.path().join("env.conf");
        let cli_file = dir.path().join("cli.conf");
        std::fs::write(&env_file, "sim.fps = 24\nsim.max_speed_mps = 10\n").unwrap();
        std::fs::write(&cli_file, "sim.max_speed_mps = 15\npolicy.fast_mps = 9\n").unwrap();
        let c = Config::resolve_from(
            Some(&env_file),
            Some(&cli_file),
            &["policy.fast_mps=11".to_string()],
        )
        .unwrap();
        assert_eq!(c.sim.fps, 24);
        assert_relative_eq!(c.sim.max_speed_mps, 15.0);
        assert_relative_eq!(c.control.fast_mps, 11.0);

        assert!(matches!(
            Config::resolve_from(None, None, &["nonsense".to_string()]),
            Err(ConfigError::Syntax { line: 1 })
        ));
    }

    #[test]
    fn grid_spec_uses_raster_settings() {
        let c = Config::parse("raster.width_px = 128\nraster.height_px = 64\n").unwrap();
        let spec = c.grid_spec(ViewFrame::NorthUp, LayerSet::default());
        assert_eq!(spec.width_px, 128);
        assert_eq!(spec.height_px, 64);
        assert_eq!(spec.frame, ViewFrame::NorthUp);
    }
}
