//! Imitation learning on expert drives: decision-rate data collection with
//! periodic noise injection, a gzip JSONL dataset format, plan-view feature
//! extraction, and mini-batch behavior cloning of the linear policy.

use crate::geometry::{
    local_to_global_yaw, plan_location, CameraIntrinsics, Estimate3D, Frame, ObjectClass, PlanPose,
    ViewFrame,
};
use crate::policy::{
    featurize, pid_control, Action, ControlParams, LinearPolicyWeights, WeightsError,
};
use crate::raster::{render_plan_view, GridSpec, LayerSet, PlanObject, PlanViewImage, RasterError};
use crate::sensor::{sense, NoiseProfile, SensedObject};
use crate::world::expert::ExpertDriver;
use crate::world::scenario::{make_scenario, network_for, ScenarioId};
use crate::world::{SimParams, StuckMonitor};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;
use std::path::Path;
use thiserror::Error;

/// The policy is consulted once every this many simulation frames; the
/// chosen action's controls are held in between.
pub const DECISION_PERIOD_FRAMES: u64 = 7;

/// How many previous decision poses feed the ego-history channel.
pub const HISTORY_DECISIONS: usize = 36;

/// Stream constant mixed into the world seed for the sensor rng.
pub const SENSOR_STREAM: u64 = 0x53454E53;
/// Stream constant mixed into the world seed for action noise injection.
pub const NOISE_STREAM: u64 = 0x4E4F4953;

#[derive(Debug, Error)]
pub enum ImitationError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: action {value} out of range")]
    BadAction { line: usize, value: u8 },
    #[error("{0} split is empty; collect more data")]
    EmptySplit(&'static str),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// One perceived object as stored on disk. `det` is the pixel box
/// `[u_min, v_min, u_max, v_max]`; `est` and `truth` are
/// `[depth, local_yaw, length, width, height]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObject {
    pub class: ObjectClass,
    pub det: [f64; 4],
    pub x_off: f64,
    pub est: [f64; 5],
    pub truth: [f64; 5],
}

fn pack_estimate(e: &Estimate3D) -> [f64; 5] {
    [e.depth_m, e.local_yaw_rad, e.length_m, e.width_m, e.height_m]
}

fn unpack_estimate(a: &[f64; 5]) -> Estimate3D {
    Estimate3D { depth_m: a[0], local_yaw_rad: a[1], length_m: a[2], width_m: a[3], height_m: a[4] }
}

impl FrameObject {
    pub fn from_sensed(s: &SensedObject) -> FrameObject {
        FrameObject {
            class: s.class,
            det: [s.detection.u_min, s.detection.v_min, s.detection.u_max, s.detection.v_max],
            x_off: s.detection.x_center_offset,
            est: pack_estimate(&s.estimate),
            truth: pack_estimate(&s.truth),
        }
    }

    pub fn estimate(&self) -> Estimate3D {
        unpack_estimate(&self.est)
    }

    pub fn truth3d(&self) -> Estimate3D {
        unpack_estimate(&self.truth)
    }
}

/// One decision-rate dataset record. `ego` is the world pose
/// `[x, y, yaw]`; `action` is the expert label even on frames where an
/// injected random action was executed instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub scenario: String,
    pub seed: u64,
    pub frame: u64,
    pub speed: f64,
    pub yaw_rate: f64,
    pub ego: [f64; 3],
    pub objects: Vec<FrameObject>,
    pub action: u8,
    pub noise_flag: bool,
}

impl FrameRecord {
    pub fn ego_pose(&self) -> PlanPose {
        PlanPose::new(self.ego[0], self.ego[1], self.ego[2], Frame::World)
    }

    /// Frames tainted by noise injection are excluded from training.
    pub fn eligible(&self) -> bool {
        !self.noise_flag
    }
}

/// An ordered list of frame records, possibly spanning many rollouts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub frames: Vec<FrameRecord>,
}

impl Dataset {
    pub fn new(frames: Vec<FrameRecord>) -> Dataset {
        Dataset { frames }
    }

    /// Contiguous index ranges belonging to single rollouts. A rollout
    /// boundary is a change of scenario or seed, or a frame counter that
    /// stops increasing.
    pub fn rollout_spans(&self) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        if self.frames.is_empty() {
            return spans;
        }
        let mut start = 0;
        for i in 1..self.frames.len() {
            let prev = &self.frames[i - 1];
            let cur = &self.frames[i];
            if cur.scenario != prev.scenario || cur.seed != prev.seed || cur.frame <= prev.frame {
                spans.push(start..i);
                start = i;
            }
        }
        spans.push(start..self.frames.len());
        spans
    }

    /// Train/validation indices. With two or more rollouts the last tenth
    /// of the rollouts (at least one) validates; a lone rollout is cut
    /// frame-wise at ninety percent.
    pub fn split(&self) -> (Vec<usize>, Vec<usize>) {
        let spans = self.rollout_spans();
        if spans.len() >= 2 {
            let n_val = (spans.len() / 10).max(1);
            let cut = spans.len() - n_val;
            let train = spans[..cut].iter().flat_map(|r| r.clone()).collect();
            let val = spans[cut..].iter().flat_map(|r| r.clone()).collect();
            (train, val)
        } else {
            let n = self.frames.len();
            let cut = (n * 9 / 10).max(1).min(n);
            ((0..cut).collect(), (cut..n).collect())
        }
    }

    /// Serializes to gzip-compressed JSON lines.
    pub fn encode(&self) -> Result<Vec<u8>, ImitationError> {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        for frame in &self.frames {
            let line = serde_json::to_string(frame)
                .map_err(|source| ImitationError::Json { line: 0, source })?;
            enc.write_all(line.as_bytes())?;
            enc.write_all(b"\n")?;
        }
        Ok(enc.finish()?)
    }

    /// Decodes gzip JSON lines, validating the action range. Never panics
    /// on malformed input.
    pub fn decode(bytes: &[u8]) -> Result<Dataset, ImitationError> {
        let mut reader = BufReader::new(GzDecoder::new(bytes));
        let mut frames = Vec::new();
        let mut buf = String::new();
        let mut line_no = 0usize;
        loop {
            buf.clear();
            if reader.read_line(&mut buf)? == 0 {
                break;
            }
            line_no += 1;
            let line = buf.trim();
            if line.is_empty() {
                continue;
            }
            let frame: FrameRecord = serde_json::from_str(line)
                .map_err(|source| ImitationError::Json { line: line_no, source })?;
            if frame.action as usize >= Action::COUNT {
                return Err(ImitationError::BadAction { line: line_no, value: frame.action });
            }
            frames.push(frame);
        }
        Ok(Dataset { frames })
    }

    pub fn save(&self, path: &Path) -> Result<(), ImitationError> {
        Ok(std::fs::write(path, self.encode()?)?)
    }

    pub fn load(path: &Path) -> Result<Dataset, ImitationError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Dataset::decode(&bytes)
    }

    /// Loads and concatenates several dataset files in the given order.
    pub fn load_many<P: AsRef<Path>>(paths: &[P]) -> Result<Dataset, ImitationError> {
        let mut frames = Vec::new();
        for p in paths {
            frames.extend(Dataset::load(p.as_ref())?.frames);
        }
        Ok(Dataset { frames })
    }
}

/// Collection settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectOptions {
    /// Simulation frames to roll out; only whole decisions are kept.
    pub steps: u64,
    /// Wall-clock period between injected random actions; zero disables
    /// injection.
    pub noise_period_s: f64,
    /// Physics and scripted-traffic parameters.
    pub params: SimParams,
    /// Gains used to execute the chosen actions.
    pub control: ControlParams,
}

impl Default for CollectOptions {
    fn default() -> Self {
        CollectOptions {
            steps: 5600,
            noise_period_s: 30.0,
            params: SimParams::default(),
            control: ControlParams::default(),
        }
    }
}

/// What happened during one collection rollout.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CollectReport {
    pub records: usize,
    pub injected: usize,
    pub collisions: usize,
    pub interventions: usize,
}

/// Rolls out the expert in a scenario, recording one frame per decision.
///
/// Every `noise_period_s` of sim time one decision executes a uniformly
/// random action instead of the expert's. The stored label is always the
/// expert's choice, and the injected decision plus its next
/// [`DECISION_PERIOD_FRAMES`] decisions are flagged as noise so training
/// can skip both the corrupted step and the recovery.
pub fn collect(
    scenario: ScenarioId,
    seed: u64,
    opts: &CollectOptions,
    profile: &NoiseProfile,
    intr: &CameraIntrinsics,
) -> (Dataset, CollectReport) {
    let mut world = make_scenario(scenario, seed);
    world.params = opts.params;
    let mut expert = ExpertDriver::new();
    let mut monitor = StuckMonitor::new(&world.params);
    let mut sensor_rng = ChaCha8Rng::seed_from_u64(seed ^ SENSOR_STREAM);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_STREAM);
    let control_params = opts.control;
    let fps = world.params.fps as f64;
    let interval =
        (opts.noise_period_s * fps / DECISION_PERIOD_FRAMES as f64).floor().max(0.0) as u64;

    let decisions = opts.steps / DECISION_PERIOD_FRAMES;
    let mut frames = Vec::with_capacity(decisions as usize);
    let mut report = CollectReport::default();

    for i in 0..decisions {
        let sensed = sense(&world, intr, profile, &mut sensor_rng);
        let label = expert.action(&world);
        let injected = interval > 0 && i > 0 && i % interval == 0;
        let flagged = if interval > 0 && i > 0 {
            let last_injection = i / interval * interval;
            last_injection > 0 && i - last_injection <= DECISION_PERIOD_FRAMES
        } else {
            false
        };
        let executed = if injected {
            report.injected += 1;
            Action::from_index(noise_rng.gen_range(0..Action::COUNT)).unwrap()
        } else {
            label
        };

        frames.push(FrameRecord {
            scenario: scenario.to_string(),
            seed,
            frame: world.frame_index,
            speed: world.ego.speed_mps,
            yaw_rate: world.ego.yaw_rate,
            ego: [world.ego.pose.x_m, world.ego.pose.y_m, world.ego.pose.yaw_rad],
            objects: sensed.iter().map(FrameObject::from_sensed).collect(),
            action: label.index() as u8,
            noise_flag: flagged || injected,
        });

        let control = pid_control(executed, world.ego.speed_mps, &control_params);
        for _ in 0..DECISION_PERIOD_FRAMES {
            world.step(&control);
            report.collisions += world.detect_collisions().len();
            if monitor.observe(world.frame_index, world.ego.pose.position()) {
                let pose = world.intervene();
                monitor.reset(world.frame_index, pose.position());
                report.interventions += 1;
            }
        }
    }
    report.records = frames.len();
    (Dataset { frames }, report)
}

/// Which inputs the cloned policy sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub view: ViewFrame,
    pub map: bool,
    pub history: bool,
    /// Drop the plan view entirely, leaving only speed, yaw rate, and bias.
    pub blind: bool,
    pub width_px: u32,
    pub height_px: u32,
    pub meters_per_px: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let grid = GridSpec::default();
        FeatureConfig {
            view: ViewFrame::Travel,
            map: false,
            history: false,
            blind: false,
            width_px: grid.width_px,
            height_px: grid.height_px,
            meters_per_px: grid.meters_per_px,
        }
    }
}

impl FeatureConfig {
    pub fn grid_spec(&self) -> GridSpec {
        let layers = if self.blind {
            LayerSet { vehicles: false, pedestrians: false, map: false, ego_history: false }
        } else {
            LayerSet {
                vehicles: true,
                pedestrians: true,
                map: self.map,
                ego_history: self.history,
            }
        };
        GridSpec {
            width_px: self.width_px,
            height_px: self.height_px,
            meters_per_px: self.meters_per_px,
            frame: self.view,
            layers,
        }
    }

    pub fn channel_count(&self) -> usize {
        if self.blind {
            0
        } else {
            2 + usize::from(self.map) + usize::from(self.history)
        }
    }

    pub fn feature_len(&self) -> usize {
        crate::policy::feature_len(self.channel_count())
    }

    /// Short name used in reports, for example `north+map` or `blind`.
    pub fn label(&self) -> String {
        if self.blind {
            return "blind".to_string();
        }
        let mut s = self.view.as_str().to_string();
        if self.map {
            s.push_str("+map");
        }
        if self.history {
            s.push_str("+history");
        }
        s
    }
}

/// Positions of estimated objects in the camera plan view.
pub fn record_plan_objects(rec: &FrameRecord, intr: &CameraIntrinsics) -> Vec<PlanObject> {
    rec.objects
        .iter()
        .map(|o| {
            let est = o.estimate();
            let pos = plan_location(est.depth_m, o.x_off, intr.focal_length_px);
            let yaw = local_to_global_yaw(est.local_yaw_rad, o.x_off, intr.focal_length_px);
            PlanObject {
                class: o.class,
                pose: PlanPose::new(pos.x, pos.y, yaw, Frame::Camera),
                length_m: est.length_m,
                width_m: est.width_m,
            }
        })
        .collect()
}

/// Renders the plan view for one record.
pub fn render_record(
    rec: &FrameRecord,
    spec: &GridSpec,
    history: &[PlanPose],
    map_quads: &[[crate::geometry::Vec2; 4]],
    intr: &CameraIntrinsics,
) -> Result<PlanViewImage, RasterError> {
    render_plan_view(&record_plan_objects(rec, intr), &rec.ego_pose(), spec, history, map_quads)
}

/// Feature vectors for every record, in dataset order. Rendering runs in
/// parallel; the output does not depend on the thread count.
pub fn build_features(
    ds: &Dataset,
    config: &FeatureConfig,
    intr: &CameraIntrinsics,
) -> Result<Vec<Vec<f64>>, ImitationError> {
    if config.blind {
        return Ok(ds
            .frames
            .iter()
            .map(|r| vec![r.speed / 30.0, r.yaw_rate, 1.0])
            .collect());
    }
    let spec = config.grid_spec();
    let mut quads_by_scenario: HashMap<&str, Vec<[crate::geometry::Vec2; 4]>> = HashMap::new();
    if config.map {
        for rec in &ds.frames {
            if !quads_by_scenario.contains_key(rec.scenario.as_str()) {
                let quads = rec
                    .scenario
                    .parse::<ScenarioId>()
                    .map(|id| network_for(id).map_quads)
                    .unwrap_or_default();
                quads_by_scenario.insert(&rec.scenario, quads);
            }
        }
    }
    let no_quads: Vec<[crate::geometry::Vec2; 4]> = Vec::new();
    let span_start: Vec<usize> = {
        let mut starts = vec![0; ds.frames.len()];
        for span in ds.rollout_spans() {
            for i in span.clone() {
                starts[i] = span.start;
            }
        }
        starts
    };
    ds.frames
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let history: Vec<PlanPose> = if config.history {
                let lo = span_start[i].max(i.saturating_sub(HISTORY_DECISIONS));
                ds.frames[lo..i].iter().map(|r| r.ego_pose()).collect()
            } else {
                Vec::new()
            };
            let quads = quads_by_scenario.get(rec.scenario.as_str()).unwrap_or(&no_quads);
            let img = render_record(rec, &spec, &history, quads, intr)?;
            Ok(featurize(&img, rec.speed, rec.yaw_rate))
        })
        .collect()
}

/// Mean cross-entropy of the linear policy over the indexed samples.
pub fn ce_loss(
    weights: &LinearPolicyWeights,
    features: &[Vec<f64>],
    labels: &[u8],
    idx: &[usize],
) -> f64 {
    let mut total = 0.0;
    for &i in idx {
        let logits = weights.logits(&features[i]).expect("feature length fixed by training");
        total += lse(&logits) - logits[labels[i] as usize];
    }
    total / idx.len().max(1) as f64
}

/// Gradient of [`ce_loss`] with respect to the flattened weights.
pub fn ce_grad(
    weights: &LinearPolicyWeights,
    features: &[Vec<f64>],
    labels: &[u8],
    idx: &[usize],
) -> Vec<f64> {
    let cols = weights.cols as usize;
    let mut grad = vec![0.0; weights.w.len()];
    for &i in idx {
        let logits = weights.logits(&features[i]).expect("feature length fixed by training");
        let lse = lse(&logits);
        for (k, &logit) in logits.iter().enumerate() {
            let mut p = (logit - lse).exp();
            if k == labels[i] as usize {
                p -= 1.0;
            }
            let row = &mut grad[k * cols..(k + 1) * cols];
            for (g, &x) in row.iter_mut().zip(&features[i]) {
                *g += p * x;
            }
        }
    }
    let scale = 1.0 / idx.len().max(1) as f64;
    for g in &mut grad {
        *g *= scale;
    }
    grad
}

fn lse(logits: &[f64]) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln()
}

/// Gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { epochs: 2, lr: 1e-3, batch_size: 64, seed: 0 }
    }
}

/// Losses measured after each epoch on the full train and validation sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_frames: usize,
    pub val_frames: usize,
    pub feature_len: usize,
    pub train_ce: Vec<f64>,
    pub val_ce: Vec<f64>,
}

/// Behavior-clones the expert labels with mini-batch gradient descent on
/// the softmax cross-entropy, starting from zero weights. Noise-flagged
/// frames are excluded from both splits.
pub fn train_bc(
    ds: &Dataset,
    config: &FeatureConfig,
    opts: &TrainOptions,
    intr: &CameraIntrinsics,
) -> Result<(LinearPolicyWeights, TrainReport), ImitationError> {
    let features = build_features(ds, config, intr)?;
    let labels: Vec<u8> = ds.frames.iter().map(|f| f.action).collect();
    let (train_all, val_all) = ds.split();
    let train: Vec<usize> =
        train_all.into_iter().filter(|&i| ds.frames[i].eligible()).collect();
    let val: Vec<usize> = val_all.into_iter().filter(|&i| ds.frames[i].eligible()).collect();
    if train.is_empty() {
        return Err(ImitationError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(ImitationError::EmptySplit("validation"));
    }

    let cols = config.feature_len() as u32;
    let mut weights = LinearPolicyWeights::zeros(Action::COUNT as u32, cols);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = TrainReport {
        train_frames: train.len(),
        val_frames: val.len(),
        feature_len: cols as usize,
        train_ce: Vec::new(),
        val_ce: Vec::new(),
    };

    let mut order = train.clone();
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(opts.batch_size.max(1)) {
            let grad = ce_grad(&weights, &features, &labels, batch);
            for (w, g) in weights.w.iter_mut().zip(&grad) {
                *w -= opts.lr * g;
            }
        }
        report.train_ce.push(ce_loss(&weights, &features, &labels, &train));
        report.val_ce.push(ce_loss(&weights, &features, &labels, &val));
    }
    Ok((weights, report))
}
