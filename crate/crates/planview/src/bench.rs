//! Closed-loop benchmarking: rolls each policy through the pipeline of
//! sensing, plan-view rendering, and control, then aggregates collision
//! and intervention rates per distance plus 3D estimation error metrics.

use crate::geometry::{CameraIntrinsics, Estimate3D, PlanPose};
use crate::imitation::{
    Dataset, FeatureConfig, SENSOR_STREAM, DECISION_PERIOD_FRAMES, HISTORY_DECISIONS,
};
use crate::policy::{
    featurize, occupancy_policy, pid_control, ControlParams, LinearPolicyWeights, OccupancyParams,
};
use crate::raster::{render_plan_view, GridSpec, PlanObject, RasterError};
use crate::sensor::{sense, NoiseProfile, SensedObject};
use crate::world::expert::ExpertDriver;
use crate::world::scenario::{make_scenario, network_for, ScenarioId};
use crate::world::{SimParams, StuckMonitor};
use crate::policy::WeightsError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::VecDeque;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("rollouts covered zero distance; rates are undefined")]
    ZeroDistance,
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// A driving policy under benchmark.
#[derive(Debug, Clone)]
pub enum PolicyKind {
    /// Privileged scripted driver reading true world state.
    Expert,
    /// Heuristic arc-clearance policy on the rendered plan view.
    Occupancy,
    /// Behavior-cloned linear policy on extracted features.
    Bc { weights: LinearPolicyWeights, features: FeatureConfig },
}

impl PolicyKind {
    pub fn name(&self) -> String {
        match self {
            PolicyKind::Expert => "expert".to_string(),
            PolicyKind::Occupancy => "occupancy".to_string(),
            PolicyKind::Bc { features, .. } => format!("bc[{}]", features.label()),
        }
    }
}

/// Outcome counts for one rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutMetrics {
    pub scenario: ScenarioId,
    pub world_seed: u64,
    pub frames: u64,
    pub decisions: u64,
    pub distance_m: f64,
    pub collisions: usize,
    pub interventions: usize,
}

/// Rates over a set of rollouts. Rates divide pooled counts by pooled
/// distance; the standard deviations are sample deviations of the
/// per-rollout rates, ignoring rollouts that did not move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateMetrics {
    pub rollouts: usize,
    pub distance_m: f64,
    pub collisions: usize,
    pub interventions: usize,
    pub collisions_per_100m: f64,
    pub collisions_std: f64,
    pub interventions_per_100m: f64,
    pub interventions_std: f64,
}

/// Pools rollouts into rates per 100 m.
pub fn aggregate(rollouts: &[RolloutMetrics]) -> Result<AggregateMetrics, BenchError> {
    let distance: f64 = rollouts.iter().map(|r| r.distance_m).sum();
    if !(distance > 0.0) {
        return Err(BenchError::ZeroDistance);
    }
    let collisions: usize = rollouts.iter().map(|r| r.collisions).sum();
    let interventions: usize = rollouts.iter().map(|r| r.interventions).sum();
    let rate = |count: usize| 100.0 * count as f64 / distance;
    let std_of = |per: &dyn Fn(&RolloutMetrics) -> usize| {
        let rates: Vec<f64> = rollouts
            .iter()
            .filter(|r| r.distance_m > 0.0)
            .map(|r| 100.0 * per(r) as f64 / r.distance_m)
            .collect();
        if rates.len() < 2 {
            return 0.0;
        }
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let var =
            rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (rates.len() - 1) as f64;
        var.sqrt()
    };
    Ok(AggregateMetrics {
        rollouts: rollouts.len(),
        distance_m: distance,
        collisions,
        interventions,
        collisions_per_100m: rate(collisions),
        collisions_std: std_of(&|r| r.collisions),
        interventions_per_100m: rate(interventions),
        interventions_std: std_of(&|r| r.interventions),
    })
}

/// Shared settings for a batch of rollouts.
#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    /// Rollouts per scenario.
    pub rollouts: u64,
    /// Frames per rollout.
    pub steps: u64,
    /// User seed mixed into each rollout's world seed.
    pub seed: u64,
    /// Physics and scripted-traffic parameters.
    pub params: SimParams,
    /// Sensor noise driving non-expert policies.
    pub profile: NoiseProfile,
    pub camera: CameraIntrinsics,
    pub control: ControlParams,
    pub occupancy: OccupancyParams,
    /// Grid geometry for the occupancy policy's rendered view; the frame
    /// and layers are fixed by the policy.
    pub grid: GridSpec,
}

impl BenchOptions {
    /// Ten rollouts of 800 frames with default physics and geometry.
    pub fn new(profile: NoiseProfile) -> BenchOptions {
        BenchOptions {
            rollouts: 10,
            steps: 800,
            seed: 0,
            params: SimParams::default(),
            profile,
            camera: CameraIntrinsics::default(),
            control: ControlParams::default(),
            occupancy: OccupancyParams::default(),
            grid: GridSpec::default(),
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// World seed for one rollout, spread from the scenario, user seed, and
/// rollout index so every rollout sees distinct traffic.
pub fn mix_seed(scenario: ScenarioId, user_seed: u64, rollout: u64) -> u64 {
    splitmix(splitmix(splitmix(user_seed) ^ scenario.stable_code()) ^ rollout)
}

/// Runs one policy through one scenario for `steps` frames, deciding every
/// [`DECISION_PERIOD_FRAMES`] frames and holding controls in between.
pub fn run_rollout(
    policy: &PolicyKind,
    scenario: ScenarioId,
    world_seed: u64,
    opts: &BenchOptions,
) -> Result<RolloutMetrics, BenchError> {
    let intr = opts.camera;
    let profile = &opts.profile;
    let mut world = make_scenario(scenario, world_seed);
    world.params = opts.params;
    let mut monitor = StuckMonitor::new(&world.params);
    let mut sensor_rng = ChaCha8Rng::seed_from_u64(world_seed ^ SENSOR_STREAM);
    let control_params = opts.control;
    let occupancy_params = opts.occupancy;
    let occupancy_grid = GridSpec {
        frame: crate::geometry::ViewFrame::Travel,
        layers: crate::raster::LayerSet::default(),
        ..opts.grid
    };
    let mut expert = ExpertDriver::new();
    let mut history: VecDeque<PlanPose> = VecDeque::new();
    let map_quads = match policy {
        PolicyKind::Bc { features, .. } if features.map && !features.blind => {
            network_for(scenario).map_quads
        }
        _ => Vec::new(),
    };

    let decisions = opts.steps / DECISION_PERIOD_FRAMES;
    let mut metrics = RolloutMetrics {
        scenario,
        world_seed,
        frames: decisions * DECISION_PERIOD_FRAMES,
        decisions,
        distance_m: 0.0,
        collisions: 0,
        interventions: 0,
    };

    for _ in 0..decisions {
        let action = match policy {
            PolicyKind::Expert => expert.action(&world),
            PolicyKind::Occupancy => {
                let sensed = sense(&world, &intr, profile, &mut sensor_rng);
                let img = render_plan_view(
                    &plan_objects(&sensed, &intr),
                    &world.ego.pose,
                    &occupancy_grid,
                    &[],
                    &[],
                )?;
                occupancy_policy(&img, &occupancy_params)
            }
            PolicyKind::Bc { weights, features } => {
                let feats = if features.blind {
                    vec![world.ego.speed_mps / 30.0, world.ego.yaw_rate, 1.0]
                } else {
                    let sensed = sense(&world, &intr, profile, &mut sensor_rng);
                    let past: Vec<PlanPose> = history.iter().copied().collect();
                    let img = render_plan_view(
                        &plan_objects(&sensed, &intr),
                        &world.ego.pose,
                        &features.grid_spec(),
                        &past,
                        &map_quads,
                    )?;
                    featurize(&img, world.ego.speed_mps, world.ego.yaw_rate)
                };
                weights.predict(&feats)?
            }
        };
        history.push_back(world.ego.pose);
        if history.len() > HISTORY_DECISIONS {
            history.pop_front();
        }

        let control = pid_control(action, world.ego.speed_mps, &control_params);
        for _ in 0..DECISION_PERIOD_FRAMES {
            let before = world.ego.pose.position();
            world.step(&control);
            metrics.distance_m += world.ego.pose.position().dist(before);
            metrics.collisions += world.detect_collisions().len();
            if monitor.observe(world.frame_index, world.ego.pose.position()) {
                let pose = world.intervene();
                monitor.reset(world.frame_index, pose.position());
                metrics.interventions += 1;
            }
        }
    }
    Ok(metrics)
}

fn plan_objects(sensed: &[SensedObject], intr: &CameraIntrinsics) -> Vec<PlanObject> {
    use crate::geometry::{local_to_global_yaw, plan_location, Frame};
    sensed
        .iter()
        .map(|s| {
            let pos =
                plan_location(s.estimate.depth_m, s.detection.x_center_offset, intr.focal_length_px);
            let yaw = local_to_global_yaw(
                s.estimate.local_yaw_rad,
                s.detection.x_center_offset,
                intr.focal_length_px,
            );
            PlanObject {
                class: s.class,
                pose: PlanPose::new(pos.x, pos.y, yaw, Frame::Camera),
                length_m: s.estimate.length_m,
                width_m: s.estimate.width_m,
            }
        })
        .collect()
}

/// All rollouts of one scenario, in parallel; rollout `k` uses the world
/// seed `mix_seed(scenario, user_seed, k)`.
pub fn run_scenario(
    policy: &PolicyKind,
    scenario: ScenarioId,
    opts: &BenchOptions,
) -> Result<Vec<RolloutMetrics>, BenchError> {
    (0..opts.rollouts)
        .into_par_iter()
        .map(|k| run_rollout(policy, scenario, mix_seed(scenario, opts.seed, k), opts))
        .collect()
}

/// Per-scenario and pooled results for one policy.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub policy: String,
    pub per_scenario: Vec<(ScenarioId, AggregateMetrics)>,
    pub overall: AggregateMetrics,
}

/// Benchmarks a policy over several scenarios.
pub fn run_benchmark(
    policy: &PolicyKind,
    scenarios: &[ScenarioId],
    opts: &BenchOptions,
) -> Result<BenchReport, BenchError> {
    let mut per_scenario = Vec::new();
    let mut all = Vec::new();
    for &scenario in scenarios {
        let runs = run_scenario(policy, scenario, opts)?;
        per_scenario.push((scenario, aggregate(&runs)?));
        all.extend(runs);
    }
    Ok(BenchReport { policy: policy.name(), per_scenario, overall: aggregate(&all)? })
}

/// Renders a benchmark as an aligned table followed by one
/// tab-separated machine line per row.
pub fn render_benchmark(report: &BenchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "policy: {}", report.policy);
    let _ = writeln!(
        out,
        "{:<12} {:>8} {:>12} {:>12} {:>10} {:>12} {:>10}",
        "scenario", "rollouts", "distance_m", "coll/100m", "coll_std", "intv/100m", "intv_std"
    );
    let mut rows: Vec<(String, &AggregateMetrics)> =
        report.per_scenario.iter().map(|(s, m)| (s.to_string(), m)).collect();
    rows.push(("overall".to_string(), &report.overall));
    for (name, m) in &rows {
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>12.4} {:>12.4} {:>10.4} {:>12.4} {:>10.4}",
            name,
            m.rollouts,
            m.distance_m,
            m.collisions_per_100m,
            m.collisions_std,
            m.interventions_per_100m,
            m.interventions_std
        );
    }
    for (name, m) in &rows {
        let _ = writeln!(
            out,
            "row\tpolicy={}\tscenario={}\trollouts={}\tdistance_m={:.4}\tcollisions={}\tcollisions_per_100m={:.4}\tcollisions_std={:.4}\tinterventions={}\tinterventions_per_100m={:.4}\tinterventions_std={:.4}",
            report.policy,
            name,
            m.rollouts,
            m.distance_m,
            m.collisions,
            m.collisions_per_100m,
            m.collisions_std,
            m.interventions,
            m.interventions_per_100m,
            m.interventions_std
        );
    }
    out
}

/// Depth, orientation, and dimension errors of 3D estimates against truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimation3DMetrics {
    pub count: usize,
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub orientation_score: f64,
    pub dim_score: f64,
}

/// Standard monocular depth metrics plus orientation similarity and the
/// symmetric volume ratio, averaged in iteration order. Returns `None`
/// for an empty input.
pub fn estimation_metrics<'a, I>(pairs: I) -> Option<Estimation3DMetrics>
where
    I: IntoIterator<Item = (&'a Estimate3D, &'a Estimate3D)>,
{
    let mut n = 0usize;
    let (mut abs_rel, mut sq_rel, mut se, mut se_log) = (0.0, 0.0, 0.0, 0.0);
    let (mut d1, mut d2, mut d3) = (0usize, 0usize, 0usize);
    let (mut os, mut dim) = (0.0, 0.0);
    for (est, truth) in pairs {
        n += 1;
        let (d_hat, d) = (est.depth_m, truth.depth_m);
        abs_rel += (d_hat - d).abs() / d;
        sq_rel += (d_hat - d) * (d_hat - d) / d;
        se += (d_hat - d) * (d_hat - d);
        se_log += (d_hat.ln() - d.ln()) * (d_hat.ln() - d.ln());
        let ratio = (d_hat / d).max(d / d_hat);
        d1 += usize::from(ratio < 1.25);
        d2 += usize::from(ratio < 1.25 * 1.25);
        d3 += usize::from(ratio < 1.25 * 1.25 * 1.25);
        os += (1.0 + (est.local_yaw_rad - truth.local_yaw_rad).cos()) / 2.0;
        let (v_hat, v) = (est.dims().volume(), truth.dims().volume());
        dim += (v_hat / v).min(v / v_hat);
    }
    if n == 0 {
        return None;
    }
    let m = n as f64;
    Some(Estimation3DMetrics {
        count: n,
        abs_rel: abs_rel / m,
        sq_rel: sq_rel / m,
        rmse: (se / m).sqrt(),
        rmse_log: (se_log / m).sqrt(),
        delta1: d1 as f64 / m,
        delta2: d2 as f64 / m,
        delta3: d3 as f64 / m,
        orientation_score: os / m,
        dim_score: dim / m,
    })
}

/// Estimation metrics over every object in a dataset, split by class.
pub fn dataset_estimation_metrics(
    ds: &Dataset,
) -> Vec<(crate::geometry::ObjectClass, Estimation3DMetrics)> {
    use crate::geometry::ObjectClass;
    let mut out = Vec::new();
    for class in [ObjectClass::Vehicle, ObjectClass::Pedestrian] {
        let pairs: Vec<(Estimate3D, Estimate3D)> = ds
            .frames
            .iter()
            .flat_map(|f| f.objects.iter())
            .filter(|o| o.class == class)
            .map(|o| (o.estimate(), o.truth3d()))
            .collect();
        if let Some(m) = estimation_metrics(pairs.iter().map(|(a, b)| (a, b))) {
            out.push((class, m));
        }
    }
    out
}

/// Renders per-class estimation metrics with machine lines.
pub fn render_estimation(rows: &[(crate::geometry::ObjectClass, Estimation3DMetrics)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>8} {:>8} {:>8} {:>8} {:>9} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "class", "count", "abs_rel", "sq_rel", "rmse", "rmse_log", "d<1.25", "d<1.56", "d<1.95",
        "os", "dim"
    );
    for (class, m) in rows {
        let _ = writeln!(
            out,
            "{:<12} {:>8} {:>8.4} {:>8.4} {:>8.4} {:>9.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            class.as_str(),
            m.count,
            m.abs_rel,
            m.sq_rel,
            m.rmse,
            m.rmse_log,
            m.delta1,
            m.delta2,
            m.delta3,
            m.orientation_score,
            m.dim_score
        );
    }
    for (class, m) in rows {
        let _ = writeln!(
            out,
            "row\tclass={}\tcount={}\tabs_rel={:.4}\tsq_rel={:.4}\trmse={:.4}\trmse_log={:.4}\tdelta1={:.4}\tdelta2={:.4}\tdelta3={:.4}\torientation_score={:.4}\tdim_score={:.4}",
            class.as_str(),
            m.count,
            m.abs_rel,
            m.sq_rel,
            m.rmse,
            m.rmse_log,
            m.delta1,
            m.delta2,
            m.delta3,
            m.orientation_score,
            m.dim_score
        );
    }
    out
}

/// Settings for the feature ablation.
#[derive(Debug, Clone)]
pub struct AblationOptions {
    pub scenarios: Vec<ScenarioId>,
    /// Frames per collection rollout (one rollout per scenario).
    pub collect_steps: u64,
    pub train: crate::imitation::TrainOptions,
    /// Evaluation settings shared by every row.
    pub bench: BenchOptions,
}

/// One ablation result row.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub features: FeatureConfig,
    pub val_ce: f64,
    pub collisions_per_100m: f64,
    pub interventions_per_100m: f64,
}

/// Trains the cloned policy under all eight feature configurations (view
/// frame, map channel, history channel) on one shared dataset, then
/// benchmarks each on policy. Rows appear in a fixed order: travel before
/// north-up, then map off/on, then history off/on.
pub fn run_ablation(opts: &AblationOptions) -> Result<(Vec<AblationRow>, Dataset), anyhow::Error> {
    use crate::geometry::ViewFrame;
    let intr = opts.bench.camera;
    let collect_opts = crate::imitation::CollectOptions {
        steps: opts.collect_steps,
        noise_period_s: 30.0,
        params: opts.bench.params,
        control: opts.bench.control,
    };
    let mut frames = Vec::new();
    for &scenario in &opts.scenarios {
        let world_seed = mix_seed(scenario, opts.bench.seed, 0);
        let (ds, _) = crate::imitation::collect(
            scenario,
            world_seed,
            &collect_opts,
            &opts.bench.profile,
            &intr,
        );
        frames.extend(ds.frames);
    }
    let dataset = Dataset::new(frames);

    let mut rows = Vec::new();
    for view in [ViewFrame::Travel, ViewFrame::NorthUp] {
        for map in [false, true] {
            for hist in [false, true] {
                let features = FeatureConfig {
                    view,
                    map,
                    history: hist,
                    blind: false,
                    width_px: opts.bench.grid.width_px,
                    height_px: opts.bench.grid.height_px,
                    meters_per_px: opts.bench.grid.meters_per_px,
                };
                let (weights, report) =
                    crate::imitation::train_bc(&dataset, &features, &opts.train, &intr)?;
                let policy = PolicyKind::Bc { weights, features };
                let bench = run_benchmark(&policy, &opts.scenarios, &opts.bench)?;
                rows.push(AblationRow {
                    features,
                    val_ce: *report.val_ce.last().expect("at least one epoch"),
                    collisions_per_100m: bench.overall.collisions_per_100m,
                    interventions_per_100m: bench.overall.interventions_per_100m,
                });
            }
        }
    }
    Ok((rows, dataset))
}

/// Renders ablation rows with machine lines.
pub fn render_ablation(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:>8} {:>12} {:>12}",
        "features", "val_ce", "coll/100m", "intv/100m"
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{:<20} {:>8.4} {:>12.4} {:>12.4}",
            row.features.label(),
            row.val_ce,
            row.collisions_per_100m,
            row.interventions_per_100m
        );
    }
    for row in rows {
        let _ = writeln!(
            out,
            "row\tview={}\tmap={}\thistory={}\tval_ce={:.4}\tcollisions_per_100m={:.4}\tinterventions_per_100m={:.4}",
            row.features.view.as_str(),
            u8::from(row.features.map),
            u8::from(row.features.history),
            row.val_ce,
            row.collisions_per_100m,
            row.interventions_per_100m
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_3;

    fn est(depth: f64, yaw: f64, dims: [f64; 3]) -> Estimate3D {
        Estimate3D {
            depth_m: depth,
            local_yaw_rad: yaw,
            length_m: dims[0],
            width_m: dims[1],
            height_m: dims[2],
        }
    }

    #[test]
    fn mix_seed_spreads_inputs() {
        let a: ScenarioId = "highway-0".parse().unwrap();
        let b: ScenarioId = "urban-3".parse().unwrap();
        assert_eq!(mix_seed(a, 1, 0), mix_seed(a, 1, 0));
        assert_ne!(mix_seed(a, 1, 0), mix_seed(a, 1, 1));
        assert_ne!(mix_seed(a, 1, 0), mix_seed(b, 1, 0));
        assert_ne!(mix_seed(a, 1, 0), mix_seed(a, 2, 0));
    }

    #[test]
    fn estimation_metrics_match_a_worked_pair() {
        let pairs = [
            (est(11.0, FRAC_PI_3, [4.0, 2.0, 1.5]), est(10.0, 0.0, [4.0, 2.0, 2.0])),
            (est(5.0, 0.0, [1.0, 1.0, 1.0]), est(10.0, 0.0, [1.0, 1.0, 1.0])),
        ];
        let m = estimation_metrics(pairs.iter().map(|(a, b)| (a, b))).unwrap();
        assert_eq!(m.count, 2);
        // pair 1: |11-10|/10 = 0.1; pair 2: |5-10|/10 = 0.5
        assert_relative_eq!(m.abs_rel, 0.3, epsilon = 1e-12);
        // (1/10 + 25/10) / 2
        assert_relative_eq!(m.sq_rel, 1.3, epsilon = 1e-12);
        // sqrt((1 + 25) / 2)
        assert_relative_eq!(m.rmse, 13.0_f64.sqrt(), epsilon = 1e-12);
        let l1 = (11.0_f64 / 10.0).ln();
        let l2 = (5.0_f64 / 10.0).ln();
        assert_relative_eq!(m.rmse_log, ((l1 * l1 + l2 * l2) / 2.0).sqrt(), epsilon = 1e-12);
        // ratios 1.1 and 2.0: 2.0 fails all three thresholds (1.953 < 2)
        assert_relative_eq!(m.delta1, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.delta2, 0.5, epsilon = 1e-12);
        assert_relative_eq!(m.delta3, 0.5, epsilon = 1e-12);
        // ((1 + cos 60 deg)/2 + 1) / 2
        assert_relative_eq!(m.orientation_score, 0.875, epsilon = 1e-12);
        // (min(12/16, 16/12) + 1) / 2
        assert_relative_eq!(m.dim_score, 0.875, epsilon = 1e-12);
        assert!(estimation_metrics(std::iter::empty()).is_none());
    }

    #[test]
    fn delta_thresholds_are_strict() {
        let pairs = [(est(12.5, 0.0, [1.0; 3]), est(10.0, 0.0, [1.0; 3]))];
        let m = estimation_metrics(pairs.iter().map(|(a, b)| (a, b))).unwrap();
        assert_eq!(m.delta1, 0.0, "ratio exactly 1.25 must not count");
        assert_eq!(m.delta2, 1.0);
    }

    #[test]
    fn aggregate_pools_counts_and_takes_sample_std() {
        let s: ScenarioId = "urban-0".parse().unwrap();
        let mk = |distance_m, collisions, interventions| RolloutMetrics {
            scenario: s,
            world_seed: 0,
            frames: 0,
            decisions: 0,
            distance_m,
            collisions,
            interventions,
        };
        let rollouts = [mk(100.0, 2, 1), mk(50.0, 0, 0), mk(0.0, 0, 0)];
        let m = aggregate(&rollouts).unwrap();
        assert_relative_eq!(m.collisions_per_100m, 200.0 / 150.0, epsilon = 1e-12);
        assert_relative_eq!(m.interventions_per_100m, 100.0 / 150.0, epsilon = 1e-12);
        // kept per-rollout collision rates: 2.0 and 0.0
        assert_relative_eq!(m.collisions_std, 2.0_f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(m.interventions_std, 0.5_f64.sqrt(), epsilon = 1e-12);
        assert!(matches!(aggregate(&[mk(0.0, 0, 0)]), Err(BenchError::ZeroDistance)));
    }

    fn exact_opts(rollouts: u64, steps: u64, seed: u64) -> BenchOptions {
        BenchOptions { rollouts, steps, seed, ..BenchOptions::new(NoiseProfile::exact()) }
    }

    #[test]
    fn rollouts_are_deterministic_across_runs() {
        let s: ScenarioId = "urban-0".parse().unwrap();
        let opts = exact_opts(1, 210, 0);
        let a = run_rollout(&PolicyKind::Occupancy, s, 7, &opts).unwrap();
        let b = run_rollout(&PolicyKind::Occupancy, s, 7, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.decisions, 30);
        assert_eq!(a.frames, 210);
    }

    #[test]
    fn expert_rollout_moves_without_collisions_on_the_highway() {
        let s: ScenarioId = "highway-0".parse().unwrap();
        let m =
            run_rollout(&PolicyKind::Expert, s, mix_seed(s, 0, 0), &exact_opts(1, 800, 0)).unwrap();
        assert_eq!(m.collisions, 0, "expert collided");
        assert_eq!(m.interventions, 0, "expert got stuck");
        assert!(m.distance_m > 300.0, "expert only covered {} m", m.distance_m);
    }

    #[test]
    fn blind_zero_weights_still_drive() {
        let s: ScenarioId = "urban-1".parse().unwrap();
        let features = FeatureConfig { blind: true, ..FeatureConfig::default() };
        let policy = PolicyKind::Bc {
            weights: LinearPolicyWeights::zeros(9, 3),
            features,
        };
        let m = run_rollout(&policy, s, 3, &exact_opts(1, 280, 0)).unwrap();
        assert!(m.distance_m > 0.0);
    }

    #[test]
    fn benchmark_report_renders_rows() {
        let s: ScenarioId = "highway-1".parse().unwrap();
        let report = run_benchmark(&PolicyKind::Expert, &[s], &exact_opts(2, 140, 1)).unwrap();
        let text = render_benchmark(&report);
        assert!(text.contains("policy: expert"));
        assert!(text.contains("overall"));
        assert!(text.contains("collisions_per_100m="));
        assert_eq!(text.lines().filter(|l| l.starts_with("row\t")).count(), 2);
    }

    #[test]
    fn ablation_produces_eight_ordered_rows() {
        let scenarios: Vec<ScenarioId> = vec!["urban-0".parse().unwrap(), "urban-2".parse().unwrap()];
        let opts = AblationOptions {
            scenarios,
            collect_steps: 210,
            train: crate::imitation::TrainOptions { epochs: 1, ..Default::default() },
            bench: exact_opts(1, 140, 5),
        };
        let (rows, dataset) = run_ablation(&opts).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(dataset.rollout_spans().len(), 2);
        assert!(rows.iter().all(|r| r.val_ce.is_finite()));
        let labels: Vec<String> = rows.iter().map(|r| r.features.label()).collect();
        assert_eq!(labels[0], "travel");
        assert_eq!(labels[3], "travel+map+history");
        assert_eq!(labels[4], "north");
        assert_eq!(labels[7], "north+map+history");
        let text = render_ablation(&rows);
        assert_eq!(text.lines().filter(|l| l.starts_with("row\t")).count(), 8);
    }
}
