use std::fs;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::MetricsReport;
use crate::alignment::{AlignmentContext, AlignmentTrajectory};
use crate::correspondence::FeatureMap;
use crate::error::{Error, Result};
use crate::mulaw::BinningScheme;
use crate::renderer::{descriptor_map, render_with, Camera, TemplateModel};
use crate::viewpoint::Viewpoint;

pub const REPORT_FILE: &str = "report.json";
pub const TRIALS_FILE: &str = "trials.csv";
pub const TRAJECTORY_DIR: &str = "trajectories";

/// A generated target with its ground truth.
#[derive(Debug, Clone)]
pub struct TrialTarget {
    pub truth: Viewpoint<f64>,
    pub map: FeatureMap<f64>,
    /// Seed for initialization and the estimator.
    pub run_seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub truth: Viewpoint<f64>,
    pub trajectory: AlignmentTrajectory<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    pub trials: Vec<TrialResult>,
}

/// Random stream of one trial: stream `trial` of the experiment seed.
fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Pseudo-real target of trial `trial`: the template reshaped per the
/// configuration, rendered through `camera` at a random viewpoint, with
/// corrupted descriptors.
pub fn trial_target(
    config: &ExperimentConfig,
    template: &TemplateModel,
    camera: &Camera<f64>,
    trial: usize,
) -> Result<TrialTarget> {
    let mut rng = trial_rng(config.seed, trial);
    let truth = Viewpoint::new(
        rng.random_range(-180.0..180.0),
        uniform(&mut rng, config.elevation_range),
        uniform(&mut rng, config.tilt_range),
    )?;
    let s = config.shape_scale;
    let scale: [f64; 3] = std::array::from_fn(|_| 1.0 + uniform(&mut rng, [-s, s]));
    let shape = template.perturbed(scale, config.shape_sigma, &mut rng)?;
    let noise_seed = rng.next_u64();
    let run_seed = rng.next_u64();
    let render = render_with(&shape, camera, &truth, config.resolution())?;
    let map = descriptor_map(&render, &shape, &config.descriptor, &config.target_noise, noise_seed)?;
    Ok(TrialTarget { truth, map, run_seed })
}

/// Runs every trial (in parallel, results in trial order) and aggregates the report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let template = TemplateModel::load(&config.template)?;
    let scheme = BinningScheme::new(config.n_bins, config.mu)?;
    let estimator = config.estimator.build::<f64>()?;
    let mut context = AlignmentContext::new(&template, config.resolution(), &scheme, estimator.as_ref(), config.stop())?;
    context.descriptor = config.descriptor;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let target = trial_target(config, &template, &context.camera, trial)?;
            let trajectory = context.align(&target.map, Some(&target.truth), &config.init, target.run_seed)?;
            Ok(TrialResult { trial, truth: target.truth, trajectory })
        })
        .collect::<Result<Vec<_>>>()?;
    let trajectories: Vec<_> = trials.iter().map(|t| t.trajectory.clone()).collect();
    let report = MetricsReport::from_trajectories(&trajectories, &config.thresholds_deg, config.max_iterations)?;
    Ok(ExperimentOutcome { report, trials })
}

pub fn trajectory_file_name(trial: usize) -> String {
    format!("trial_{trial:05}.csv")
}

/// Writes `report.json`, `trials.csv` and one trajectory CSV per trial.
pub fn write_outcome(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    let traj_dir = dir.join(TRAJECTORY_DIR);
    fs::create_dir_all(&traj_dir)?;
    fs::write(dir.join(REPORT_FILE), outcome.report.to_json()?)?;
    let mut w = csv::Writer::from_path(dir.join(TRIALS_FILE))?;
    w.write_record(["trial", "azimuth", "elevation", "tilt", "status", "iterations", "final_error"])?;
    for t in &outcome.trials {
        let [a, e, tilt] = t.truth.components();
        w.write_record([
            t.trial.to_string(),
            a.to_string(),
            e.to_string(),
            tilt.to_string(),
            t.trajectory.status.to_string(),
            t.trajectory.iterations().to_string(),
            t.trajectory.final_error().map_or(String::new(), |x| x.to_string()),
        ])?;
        t.trajectory.write_csv(fs::File::create(traj_dir.join(trajectory_file_name(t.trial)))?)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back every trajectory file under `dir`, in file-name order.
pub fn read_trajectories(dir: &Path) -> Result<Vec<AlignmentTrajectory<f64>>> {
    let mut paths: Vec<_> = fs::read_dir(dir.join(TRAJECTORY_DIR))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "csv"));
    paths.sort();
    paths
        .iter()
        .map(|p| {
            AlignmentTrajectory::read_csv(fs::File::open(p)?).map_err(|e| Error::Format {
                path: p.display().to_string(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Recomputes the report from the trajectory files an experiment wrote.
pub fn recompute_report(dir: &Path, config: &ExperimentConfig) -> Result<MetricsReport> {
    MetricsReport::from_trajectories(&read_trajectories(dir)?, &config.thresholds_deg, config.max_iterations)
}
