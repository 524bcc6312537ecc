//! `graspforge` — dataset synthesis, model training and grasp detection
//! for a multi-fingered hand, driven entirely by explicit seeds and paths.
//!
//! Exit codes: 0 success, 1 domain failure (no feasible grasp, divergence),
//! 2 usage error, 3 io/format error.

mod commands;
mod logging;
mod ops;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::ops::{CliError, DOMAIN_EXIT, IO_EXIT};

#[derive(Parser)]
#[command(name = "graspforge", version, about = "Multi-fingered grasp synthesis engine")]
struct Cli {
    /// Worker threads for candidate/scene parallelism (1 = reproducible
    /// byte-for-byte ordering of log output as well).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a grasp dataset (Alg-style: single-object candidates
    /// transplanted into cluttered scenes).
    GenDataset(GenDatasetArgs),
    /// Train the contact-map CVAE on a dataset.
    TrainCvae(TrainCvaeArgs),
    /// Train the three-class grasp evaluator on a dataset.
    TrainEval(TrainEvalArgs),
    /// Detect a grasp pose from one record's stored contact map.
    Detect(DetectArgs),
    /// Finite-difference gradient check of both models; exit 0 iff the
    /// maximum relative error stays below 1e-4.
    Gradcheck(GradcheckArgs),
    /// Dataset statistics (class histogram), optionally revalidating every
    /// record against its stored pose.
    Stats(StatsArgs),
    /// End-to-end pipeline: sample maps, detect candidates, score, pick
    /// the optimal grasp.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GenDatasetArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// `five_finger`, `four_finger`, or a hand config path.
    #[arg(long, default_value = "five_finger")]
    hand: String,
    #[arg(long, default_value_t = 5)]
    scenes: usize,
    #[arg(long, default_value_t = 5)]
    objects_per_scene: usize,
    #[arg(long, default_value_t = 10)]
    grasps_per_object: usize,
    #[arg(long, default_value_t = 0.005)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    #[arg(long, default_value_t = 0.1)]
    crop_radius: f64,
    #[arg(long, default_value_t = 0.3)]
    crop_height: f64,
    #[arg(long, default_value_t = 0.16)]
    region_half_extent: f64,
}

#[derive(Args)]
struct TrainCvaeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Stop once the measured CE falls below this fraction of its initial
    /// value.
    #[arg(long)]
    target_ce_fraction: Option<f64>,
}

#[derive(Args)]
struct TrainEvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Class-balanced resampling.
    #[arg(long, default_value_t = false)]
    balanced: bool,
    #[arg(long)]
    target_accuracy: Option<f64>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    scene: usize,
    #[arg(long)]
    record: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Recompute each record's contact map from its stored pose and verify
    /// it matches bit-exactly.
    #[arg(long, default_value_t = false)]
    revalidate: bool,
}

#[derive(Args)]
struct PipelineArgs {
    /// Scene placement file (scene.json, as written under a dataset's
    /// `scenes/<id>/`).
    #[arg(long)]
    scene: PathBuf,
    /// Target object: instance index within the scene.
    #[arg(long)]
    object: usize,
    #[arg(long)]
    seed: u64,
    /// Contact maps per object (N).
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value = "five_finger")]
    hand: String,
    /// Rank candidates by the analytic (collision-free, then Q1) oracle
    /// instead of the learned evaluator.
    #[arg(long, default_value_t = false)]
    oracle: bool,
    /// Trained CVAE checkpoint; without it, maps come from the analytic
    /// candidate generator.
    #[arg(long)]
    cvae: Option<PathBuf>,
    /// Trained evaluator checkpoint (required unless --oracle).
    #[arg(long)]
    evaluator: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    crop_radius: f64,
    #[arg(long, default_value_t = 0.3)]
    crop_height: f64,
    #[arg(long, default_value_t = 0.005)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    #[cfg(feature = "parallel")]
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads.max(1))
            .build_global()
        {
            logging::info(&format!("thread pool already initialized: {e}"));
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        if cli.threads > 1 {
            logging::info("built without the parallel feature; --threads ignored");
        }
    }

    let outcome = match cli.command {
        Command::GenDataset(args) => commands::gen_dataset(args),
        Command::TrainCvae(args) => commands::train_cvae(args),
        Command::TrainEval(args) => commands::train_eval(args),
        Command::Detect(args) => commands::detect(args),
        Command::Gradcheck(args) => commands::gradcheck(args),
        Command::Stats(args) => commands::stats(args),
        Command::Pipeline(args) => pipeline::run(args),
    };

    match outcome {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(CliError::Domain(summary)) => {
            println!("{summary}");
            ExitCode::from(DOMAIN_EXIT)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Io(_) => IO_EXIT,
                _ => DOMAIN_EXIT,
            })
        }
    }
}
