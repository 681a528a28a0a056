use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use viewalign::alignment::{AlignmentContext, InitMode, StopCriteria};
use viewalign::correspondence::{correlate, correlate_column, FeatureMap};
use viewalign::datagen::{generate_correspondences, write_pairs_csv, GenerationConfig, PruningConfig};
use viewalign::estimator::{CoarseConfig, EstimatorKind, SearchGrid};
use viewalign::harness::{run_experiment, write_outcome, ExperimentConfig};
use viewalign::mulaw::BinningScheme;
use viewalign::renderer::{descriptor_map, render_with, NoiseSpec, TemplateModel};
use viewalign::viewpoint::Viewpoint;

#[derive(Parser)]
#[command(name = "viewalign", version, about = "Render-and-compare viewpoint alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Oracle,
    NoisyOracle,
    Reprojection,
}

#[derive(Subcommand)]
enum Command {
    /// Align the template to one synthetic target and write its trajectory.
    Align {
        #[arg(long)]
        template: PathBuf,
        #[arg(long, value_enum, default_value = "reprojection")]
        estimator: EstimatorArg,
        /// Noise level of the noisy oracle.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long, default_value_t = 255.0)]
        mu: f64,
        /// Stop threshold in degrees: one value for all axes or `az,el,tilt`.
        #[arg(long, default_value = "2", value_parser = parse_tau)]
        tau: [f64; 3],
        #[arg(long, default_value_t = 10)]
        max_iter: usize,
        /// Target viewpoint `az,el,tilt`; drawn from the seed when omitted.
        #[arg(long, value_parser = parse_triple)]
        truth: Option<[f64; 3]>,
        /// Starting viewpoint `az,el,tilt`; the azimuth initializer when omitted.
        #[arg(long, value_parser = parse_triple)]
        init: Option<[f64; 3]>,
        /// Descriptor noise of the target: `sigma,dropout`.
        #[arg(long, default_value = "0,0", value_parser = parse_noise)]
        target_noise: NoiseSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trajectory CSV; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch experiment from a configuration file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the quantization bin table as CSV.
    DumpBins {
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long, default_value_t = 255.0)]
        mu: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate dense correspondence pairs between two renders of a template.
    GenCorrespondence {
        #[arg(long)]
        template: PathBuf,
        /// Viewpoint `az,el,tilt` of the first render.
        #[arg(long, value_parser = parse_triple)]
        view_a: [f64; 3],
        /// Viewpoint `az,el,tilt` of the second render.
        #[arg(long, value_parser = parse_triple)]
        view_b: [f64; 3],
        /// Pruning configuration; visibility pruning only when omitted.
        #[arg(long)]
        pruning: Option<PathBuf>,
        #[arg(long, default_value_t = viewalign::datagen::DEFAULT_SAMPLES_PER_EDGE)]
        samples_per_edge: usize,
        #[arg(long, default_value_t = viewalign::datagen::DEFAULT_NEGATIVES_PER_POSITIVE)]
        negatives: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure correlation kernel throughput on random descriptor maps.
    BenchCorrelate {
        /// Side length of the square maps.
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| format!("invalid number {x:?}"))).collect()
}

fn parse_triple(text: &str) -> std::result::Result<[f64; 3], String> {
    match parse_list(text)?[..] {
        [a, b, c] => Ok([a, b, c]),
        _ => Err(format!("expected three comma-separated values, got {text:?}")),
    }
}

fn parse_tau(text: &str) -> std::result::Result<[f64; 3], String> {
    match parse_list(text)?[..] {
        [t] => Ok([t; 3]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err(format!("expected one or three values, got {text:?}")),
    }
}

fn parse_noise(text: &str) -> std::result::Result<NoiseSpec, String> {
    match parse_list(text)?[..] {
        [sigma, dropout] => Ok(NoiseSpec { sigma, dropout }),
        _ => Err(format!("expected `sigma,dropout`, got {text:?}")),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

#[allow(clippy::too_many_arguments)]
fn align(
    template: &Path,
    estimator: EstimatorArg,
    noise: f64,
    bins: usize,
    mu: f64,
    tau: [f64; 3],
    max_iter: usize,
    truth: Option<[f64; 3]>,
    init: Option<[f64; 3]>,
    noise_spec: NoiseSpec,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let model = TemplateModel::load(template)?;
    let scheme = BinningScheme::new(bins, mu)?;
    let stop = StopCriteria { tau, max_iterations: max_iter };
    let kind = match estimator {
        EstimatorArg::Oracle => EstimatorKind::Oracle {},
        EstimatorArg::NoisyOracle => EstimatorKind::NoisyOracle { noise },
        EstimatorArg::Reprojection => EstimatorKind::Reprojection { grid: SearchGrid::default() },
    };
    let est = kind.build::<f64>()?;
    let resolution = viewalign::renderer::DEFAULT_RESOLUTION;
    let ctx = AlignmentContext::new(&model, resolution, &scheme, est.as_ref(), stop)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = match truth {
        Some(t) => Viewpoint::from_components(t)?,
        None => Viewpoint::new(rng.random_range(-180.0..180.0), rng.random_range(-30.0..60.0), 0.0)?,
    };
    let render = render_with(&model, &ctx.camera, &truth, resolution)?;
    let target = descriptor_map(&render, &model, &ctx.descriptor, &noise_spec, rng.random())?;
    let init = match init {
        Some(viewpoint) => InitMode::Fixed { viewpoint },
        None => InitMode::Coarse { config: CoarseConfig::default() },
    };
    let trajectory = ctx.align(&target, Some(&truth), &init, seed)?;
    trajectory.write_csv(output(out)?)?;
    if out.is_some() {
        println!("{}", serde_json::to_string_pretty(&trajectory.summary())?);
    }
    Ok(())
}

fn experiment(config: &Path, out: Option<&Path>) -> Result<()> {
    let mut config = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(out) = out {
        config.output_dir = out.to_path_buf();
    }
    let outcome = run_experiment(&config)?;
    write_outcome(&outcome, &config.output_dir)?;
    print!("{}", outcome.report.to_json()?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn gen_correspondence(
    template: &Path,
    view_a: [f64; 3],
    view_b: [f64; 3],
    pruning: Option<&Path>,
    samples_per_edge: usize,
    negatives: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let model = TemplateModel::load(template)?;
    let va = Viewpoint::<f64>::from_components(view_a)?;
    let vb = Viewpoint::<f64>::from_components(view_b)?;
    let config = GenerationConfig {
        samples_per_edge,
        negatives_per_positive: negatives,
        pruning: match pruning {
            Some(p) => PruningConfig::load(p)?,
            None => PruningConfig::visibility_only(),
        },
        ..Default::default()
    };
    let set = generate_correspondences(&model, &va, &vb, &config, seed)?;
    write_pairs_csv(&set.pairs, output(out)?)?;
    eprintln!(
        "{} positive and {} negative pairs; removed {} / {} samples",
        set.positives,
        set.negatives,
        set.provenance_a.removed(),
        set.provenance_b.removed()
    );
    if let Some(d) = &set.diagnostic {
        eprintln!("warning: {d}");
    }
    Ok(())
}

fn bench_correlate(size: usize, dim: usize, repeats: usize, seed: u64) -> Result<()> {
    if size == 0 || dim == 0 || repeats == 0 {
        bail!("size, dim and repeats must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_map = || {
        let data: Vec<f64> = (0..size * size * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeatureMap::from_unnormalized(size, size, dim, data)
    };
    let (fa, fb) = (random_map()?, random_map()?);
    let cells = size * size;
    let pairs = (cells * cells) as f64;

    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let t = Instant::now();
        std::hint::black_box(correlate(&fa, &fb)?);
        best = best.min(t.elapsed().as_secs_f64());
    }
    let mut best_column = f64::INFINITY;
    for _ in 0..repeats {
        let t = Instant::now();
        for r in 0..size {
            for c in 0..size {
                std::hint::black_box(correlate_column(&fa, &fb, (r, c))?);
            }
        }
        best_column = best_column.min(t.elapsed().as_secs_f64());
    }
    println!("maps: {size}x{size}x{dim} ({cells} locations, {pairs} pairs)");
    println!("available threads: {}", available_threads());
    println!("blocked tensor: {:.3} ms, {:.1} Mpairs/s", best * 1e3, pairs / best / 1e6);
    println!("per-column:     {:.3} ms, {:.1} Mpairs/s", best_column * 1e3, pairs / best_column / 1e6);
    Ok(())
}

fn available_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Align { template, estimator, noise, bins, mu, tau, max_iter, truth, init, target_noise, seed, out } => {
            align(
                &template,
                estimator,
                noise,
                bins,
                mu,
                tau,
                max_iter,
                truth,
                init,
                target_noise,
                seed,
                out.as_deref(),
            )
        }
        Command::Experiment { config, out } => experiment(&config, out.as_deref()),
        Command::DumpBins { bins, mu, out } => {
            BinningScheme::<f64>::new(bins, mu)?.write_csv(output(out.as_deref())?)?;
            Ok(())
        }
        Command::GenCorrespondence { template, view_a, view_b, pruning, samples_per_edge, negatives, seed, out } => {
            gen_correspondence(&template, view_a, view_b, pruning.as_deref(), samples_per_edge, negatives, seed, out.as_deref())
        }
        Command::BenchCorrelate { size, dim, repeats, seed } => bench_correlate(size, dim, repeats, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_arguments() {
        assert_eq!(parse_tau("2").unwrap(), [2.0; 3]);
        assert_eq!(parse_tau("1, 2,3").unwrap(), [1.0, 2.0, 3.0]);
        assert!(parse_tau("1,2").is_err());
        assert_eq!(parse_triple("-10,20.5,0").unwrap(), [-10.0, 20.5, 0.0]);
        assert!(parse_triple("a,b,c").is_err());
        assert_eq!(parse_noise("0.1,0.2").unwrap(), NoiseSpec { sigma: 0.1, dropout: 0.2 });
        assert!(parse_noise("0.1").is_err());
    }

    #[test]
    fn command_line_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
