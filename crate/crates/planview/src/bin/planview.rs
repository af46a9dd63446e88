//! Command-line front end for the plan-view driving pipeline: collect
//! expert demonstrations, train the cloned policy, benchmark drivers,
//! render plan-view rasters, and score 3D estimation quality.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use planview::bench::{
    dataset_estimation_metrics, render_ablation, render_benchmark, render_estimation,
    run_ablation, run_benchmark, AblationOptions, PolicyKind,
};
use planview::config::Config;
use planview::geometry::{PlanPose, ViewFrame};
use planview::imitation::{
    collect, render_record, train_bc, Dataset, TrainOptions, HISTORY_DECISIONS,
};
use planview::policy::LinearPolicyWeights;
use planview::raster::{export_pgm, Channel};
use planview::world::scenario::{all_scenarios, network_for, ScenarioId};

#[derive(Parser)]
#[command(name = "planview", version, about = "Plan-view driving pipeline")]
struct Cli {
    /// Config file applied over defaults and the MPV_CONFIG file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Single `key=value` override, applied after config files. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out the expert with noisy sensing and record a dataset.
    Collect {
        /// Scenario name, for example highway-0 or urban-3.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulation frames to run.
        #[arg(long, default_value_t = 5600)]
        steps: u64,
        /// Seconds between injected random actions.
        #[arg(long, default_value_t = 30.0)]
        noise_period: f64,
        /// Output dataset (gzipped JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Behavior-clone the expert labels in one or more datasets.
    Train {
        /// Input datasets, merged in order.
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Output weights file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// View frame for rendering: travel or north.
        #[arg(long, default_value = "travel")]
        frame: String,
        /// Include the road map channel.
        #[arg(long)]
        map: bool,
        /// Include the ego history channel.
        #[arg(long)]
        history: bool,
        /// Skip rendering; features are speed, yaw rate, and a bias.
        #[arg(long)]
        blind: bool,
        /// Also write the epoch log to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Benchmark a policy over scenarios.
    Drive {
        /// expert, occupancy, or bc.
        #[arg(long)]
        policy: String,
        /// Weights file, required for the bc policy.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Comma-separated scenario names, or `all`.
        #[arg(long, default_value = "all")]
        scenarios: String,
        #[arg(long, default_value_t = 10)]
        rollouts: u64,
        /// Simulation frames per rollout.
        #[arg(long, default_value_t = 800)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// View frame the bc policy was trained with.
        #[arg(long, default_value = "travel")]
        frame: String,
        #[arg(long)]
        map: bool,
        #[arg(long)]
        history: bool,
        #[arg(long)]
        blind: bool,
        /// Also write the benchmark table to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render one recorded frame to a PGM image.
    Render {
        #[arg(long)]
        data: PathBuf,
        /// Record index within the dataset.
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
        /// Channel to export: vehicles, pedestrians, map, or ego_history.
        #[arg(long, default_value = "vehicles")]
        channel: String,
        /// View frame: travel or north.
        #[arg(long, default_value = "travel")]
        frame: String,
        #[arg(long)]
        map: bool,
        #[arg(long)]
        history: bool,
    },
    /// Score recorded 3D estimates against ground truth.
    Metrics3d {
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train and benchmark the cloned policy under all eight feature sets.
    Ablate {
        #[arg(long, default_value = "all")]
        scenarios: String,
        /// Frames per collection rollout (one rollout per scenario).
        #[arg(long, default_value_t = 5600)]
        collect_steps: u64,
        #[arg(long, default_value_t = 10)]
        rollouts: u64,
        /// Simulation frames per evaluation rollout.
        #[arg(long, default_value_t = 800)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        /// Save the shared training dataset here.
        #[arg(long)]
        data_out: Option<PathBuf>,
        /// Also write the ablation table to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_scenarios(text: &str) -> Result<Vec<ScenarioId>> {
    if text == "all" {
        return Ok(all_scenarios());
    }
    text.split(',')
        .map(|s| s.trim().parse::<ScenarioId>().map_err(anyhow::Error::msg))
        .collect()
}

fn emit(text: &str, report: Option<&PathBuf>) -> Result<()> {
    print!("{text}");
    if let Some(path) = report {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = Config::resolve(cli.config.as_deref(), &cli.set)?;
    let intr = config.camera;

    match cli.command {
        Command::Collect { scenario, seed, steps, noise_period, out } => {
            let id: ScenarioId = scenario.parse().map_err(anyhow::Error::msg)?;
            let opts = config.collect_options(steps, noise_period);
            let profile = config.noise_profile();
            let (ds, rep) = collect(id, seed, &opts, &profile, &intr);
            ds.save(&out)?;
            println!(
                "collected scenario={id} seed={seed} records={} injected={} collisions={} interventions={}",
                rep.records, rep.injected, rep.collisions, rep.interventions
            );
        }
        Command::Train {
            data,
            out,
            epochs,
            lr,
            batch,
            seed,
            frame,
            map,
            history,
            blind,
            report,
        } => {
            let ds = Dataset::load_many(&data)?;
            let view: ViewFrame = frame.parse().map_err(anyhow::Error::msg)?;
            let features = config.feature_config(view, map, history, blind);
            let opts = TrainOptions { epochs, lr, batch_size: batch, seed };
            let (weights, rep) = train_bc(&ds, &features, &opts, &intr)?;
            weights.save(&out)?;
            let mut text = format!(
                "features={} rows={} cols={}\ntrain_frames={} val_frames={}\n",
                features.label(),
                weights.rows,
                weights.cols,
                rep.train_frames,
                rep.val_frames
            );
            for (i, (t, v)) in rep.train_ce.iter().zip(&rep.val_ce).enumerate() {
                text.push_str(&format!("epoch {} train_ce={t:.6} val_ce={v:.6}\n", i + 1));
            }
            emit(&text, report.as_ref())?;
        }
        Command::Drive {
            policy,
            weights,
            scenarios,
            rollouts,
            steps,
            seed,
            frame,
            map,
            history,
            blind,
            report,
        } => {
            let ids = parse_scenarios(&scenarios)?;
            let opts = config.bench_options(rollouts, steps, seed);
            let kind = match policy.as_str() {
                "expert" => PolicyKind::Expert,
                "occupancy" => PolicyKind::Occupancy,
                "bc" => {
                    let path = weights
                        .ok_or_else(|| anyhow::anyhow!("the bc policy needs --weights"))?;
                    let w = LinearPolicyWeights::load(&path)?;
                    let view: ViewFrame = frame.parse().map_err(anyhow::Error::msg)?;
                    let features = config.feature_config(view, map, history, blind);
                    if w.cols as usize != features.feature_len() {
                        bail!(
                            "weights expect {} features but {} produces {}",
                            w.cols,
                            features.label(),
                            features.feature_len()
                        );
                    }
                    PolicyKind::Bc { weights: w, features }
                }
                other => bail!("unknown policy {other:?} (expected expert|occupancy|bc)"),
            };
            let bench = run_benchmark(&kind, &ids, &opts)?;
            emit(&render_benchmark(&bench), report.as_ref())?;
        }
        Command::Render { data, index, out, channel, frame, map, history } => {
            let ds = Dataset::load(&data)?;
            let Some(rec) = ds.frames.get(index) else {
                bail!("index {index} is out of range for {} records", ds.frames.len());
            };
            let chan: Channel = channel.parse().map_err(anyhow::Error::msg)?;
            let view: ViewFrame = frame.parse().map_err(anyhow::Error::msg)?;
            let features = config.feature_config(view, map, history, false);
            let spec = features.grid_spec();
            let past: Vec<PlanPose> = if history {
                let span = ds
                    .rollout_spans()
                    .into_iter()
                    .find(|s| s.contains(&index))
                    .unwrap_or(0..ds.frames.len());
                let lo = span.start.max(index.saturating_sub(HISTORY_DECISIONS));
                ds.frames[lo..index].iter().map(|r| r.ego_pose()).collect()
            } else {
                Vec::new()
            };
            let quads = if map {
                rec.scenario
                    .parse::<ScenarioId>()
                    .map(|id| network_for(id).map_quads)
                    .unwrap_or_default()
            } else {
                Vec::new()
            };
            let img = render_record(rec, &spec, &past, &quads, &intr)?;
            fs::write(&out, export_pgm(&img, chan)?)
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "rendered scenario={} frame={} channel={chan} occupied={}",
                rec.scenario,
                rec.frame,
                img.count(chan)
            );
        }
        Command::Metrics3d { data, report } => {
            let ds = Dataset::load_many(&data)?;
            let rows = dataset_estimation_metrics(&ds);
            emit(&render_estimation(&rows), report.as_ref())?;
        }
        Command::Ablate {
            scenarios,
            collect_steps,
            rollouts,
            steps,
            seed,
            epochs,
            lr,
            batch,
            data_out,
            report,
        } => {
            let opts = AblationOptions {
                scenarios: parse_scenarios(&scenarios)?,
                collect_steps,
                train: TrainOptions { epochs, lr, batch_size: batch, seed },
                bench: config.bench_options(rollouts, steps, seed),
            };
            let (rows, ds) = run_ablation(&opts)?;
            if let Some(path) = data_out {
                ds.save(&path)?;
            }
            emit(&render_ablation(&rows), report.as_ref())?;
        }
    }
    Ok(())
}
