use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use deptheval::harness::{self, PredictionKind, SceneKind, SynthParams};
use deptheval::{write_report, EvalConfig, OracleOptions, Report, ReportFormat, RunPlan, SampleManifest};

/// Depth prediction evaluation in 2D and 3D.
#[derive(Parser)]
#[command(name = "deptheval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score the predictions listed in a manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score a reference predictor.
    #[command(subcommand)]
    Baseline(Baseline),
    /// Write a synthetic dataset with a manifest.
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum Baseline {
    /// Constant plane at each ground truth's median depth.
    MedianPlane {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Training ground truth with the lowest absrel against each query.
    OracleNn {
        #[arg(long)]
        val_manifest: PathBuf,
        #[arg(long)]
        train_manifest: PathBuf,
        /// Rank candidates on maps downsampled by this factor.
        #[arg(long, value_name = "FACTOR", num_args = 0..=1, default_missing_value = "4")]
        downsample: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with evaluation parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Add per-stage wall-clock timings to the report.
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    fscore_threshold: Option<f64>,
    #[arg(long)]
    min_depth: Option<f64>,
    #[arg(long)]
    max_depth: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    delta_thresholds: Option<Vec<f64>>,
    #[arg(long)]
    emd_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report raw Chamfer sums instead of per-direction means.
    #[arg(long)]
    chamfer_sum: bool,
    #[arg(long)]
    png_depth_scale: Option<u32>,
}

impl RunArgs {
    fn config(&self) -> Result<EvalConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                EvalConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => EvalConfig::default(),
        };
        if let Some(v) = self.fscore_threshold {
            c.fscore_threshold_m = v;
        }
        if let Some(v) = self.min_depth {
            c.min_depth_m = v;
        }
        if let Some(v) = self.max_depth {
            c.max_depth_m = v;
        }
        if let Some(v) = &self.delta_thresholds {
            c.delta_thresholds = v.clone();
        }
        if let Some(v) = self.emd_samples {
            c.emd_sample_count = v;
        }
        if let Some(v) = self.seed {
            c.rng_seed = v;
        }
        if self.chamfer_sum {
            c.chamfer_normalized = false;
        }
        if let Some(v) = self.png_depth_scale {
            c.png_depth_scale = v;
        }
        c.validate()?;
        Ok(c)
    }

    fn plan(&self, manifest: &Path) -> Result<RunPlan> {
        let manifest = SampleManifest::load(manifest)?;
        let mut plan = RunPlan::new(manifest, self.config()?, self.workers)?;
        plan.include_timings = self.timings;
        Ok(plan)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "two_layer")]
    kind: SceneKind,
    #[arg(long, default_value = "copy")]
    pred: PredictionKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 640)]
    width: usize,
    #[arg(long, default_value_t = 480)]
    height: usize,
    /// Standard deviation of the noise, meters.
    #[arg(long)]
    sigma: Option<f64>,
    /// Offset of the shifted prediction, meters.
    #[arg(long)]
    shift: Option<f64>,
}

fn finish(report: Report, run: &RunArgs) -> Result<ExitCode> {
    if let Some(parent) = run.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    write_report(&report, &run.out, run.format)?;
    let failed = report.failed_count();
    log::info!(
        "wrote {} ({} samples, {} failed)",
        run.out.display(),
        report.records.len(),
        failed
    );
    if failed > 0 {
        eprintln!("{failed} of {} samples failed", report.records.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Eval { manifest, run } => {
            let plan = run.plan(&manifest)?;
            finish(harness::evaluate(&plan)?, &run)
        }
        Command::Baseline(Baseline::MedianPlane { manifest, run }) => {
            let plan = run.plan(&manifest)?;
            finish(harness::run_median_plane(&plan)?, &run)
        }
        Command::Baseline(Baseline::OracleNn {
            val_manifest,
            train_manifest,
            downsample,
            run,
        }) => {
            let plan = run.plan(&val_manifest)?;
            let train = SampleManifest::load(&train_manifest)?;
            let options = OracleOptions {
                downsample_factor: downsample,
            };
            finish(harness::run_oracle_nn(&plan, &train, options)?, &run)
        }
        Command::Synth(args) => {
            let mut params = SynthParams::with_size(args.width, args.height);
            if let Some(s) = args.sigma {
                params.noise_sigma = s;
            }
            if let Some(s) = args.shift {
                params.shift = s;
            }
            let path = harness::write_synthetic_dataset(
                &args.out, args.kind, args.pred, &params, args.seed, args.count,
            )?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Error chain joined with ": ", skipping causes already spelled out by
/// the message wrapping them.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
