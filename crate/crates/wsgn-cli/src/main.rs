mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wsgn_core::model::{Mode, NormalizationSet};
use wsgn_core::{Error, Result};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "wsgn",
    version,
    about = "Weakly supervised temporal action localization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Key=value configuration file layered over built-in defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for data generation and training
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark with train and test splits
    Gen {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train a model from a dataset manifest
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset manifest to train on
        #[arg(long)]
        data: PathBuf,
        /// Continue from an existing checkpoint
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Training objective: naive, wsgn, or supervised
        #[arg(long)]
        mode: Option<Mode>,
        /// Enabled frame-weight normalizations, e.g. zloc+gloc+sloc or all
        #[arg(long)]
        normalizations: Option<NormalizationSet>,
        /// Number of training epochs
        #[arg(long)]
        epochs: Option<usize>,
        /// SGD learning rate
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Score a dataset with a trained checkpoint and extract detections
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset manifest to score
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint produced by the train command
        #[arg(long)]
        checkpoint: PathBuf,
        /// Score threshold for opening a detection run
        #[arg(long)]
        threshold: Option<f64>,
        /// Also write per-video model matrices (features, probabilities,
        /// per-normalization weights, fused weights, scores)
        #[arg(long)]
        dump_components: bool,
    },
    /// Evaluate detections, or timepoint scores with --localization
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset manifest carrying the ground truth
        #[arg(long)]
        data: PathBuf,
        /// Detection file produced by the detect command
        #[arg(long)]
        detections: Option<PathBuf>,
        /// Evaluate sampled timepoint scores instead of detections
        #[arg(long)]
        localization: bool,
        /// Directory of per-video timepoint score dumps
        #[arg(long)]
        scores_dir: Option<PathBuf>,
    },
    /// Train and evaluate every model variant and tabulate the results
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory holding train/ and test/ splits from the gen command
        #[arg(long)]
        data: PathBuf,
        /// Number of training epochs for every variant
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Compare analytic gradients against finite differences
    Gradcheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Corrupt one gradient block to verify the check catches it
        #[arg(long)]
        break_gradients: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        config.set_seed(seed);
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { common } => {
            let config = load_config(&common)?;
            commands::gen::run(&config, &common.out)?;
        }
        Command::Train {
            common,
            data,
            resume,
            mode,
            normalizations,
            epochs,
            learning_rate,
        } => {
            let mut config = load_config(&common)?;
            if let Some(mode) = mode {
                config.train.mode = mode;
            }
            if let Some(set) = normalizations {
                config.normalizations = set;
            }
            if let Some(epochs) = epochs {
                config.train.epochs = epochs;
            }
            if let Some(learning_rate) = learning_rate {
                config.train.learning_rate = learning_rate;
            }
            commands::train::run(&config, &data, resume.as_deref(), &common.out)?;
        }
        Command::Detect {
            common,
            data,
            checkpoint,
            threshold,
            dump_components,
        } => {
            let mut config = load_config(&common)?;
            if let Some(threshold) = threshold {
                config.score_threshold = threshold;
            }
            commands::detect::run(&config, &data, &checkpoint, dump_components, &common.out)?;
        }
        Command::Eval {
            common,
            data,
            detections,
            localization,
            scores_dir,
        } => {
            let config = load_config(&common)?;
            if localization {
                let scores_dir = scores_dir.ok_or(Error::InvalidConfig {
                    field: "scores_dir",
                    detail: "localization evaluation needs --scores-dir".to_string(),
                })?;
                commands::eval::run_localization(&data, &scores_dir, &common.out)?;
            } else {
                let detections = detections.ok_or(Error::InvalidConfig {
                    field: "detections",
                    detail: "detection evaluation needs --detections".to_string(),
                })?;
                commands::eval::run_detection(&config, &data, &detections, &common.out)?;
            }
        }
        Command::Ablate {
            common,
            data,
            epochs,
        } => {
            let mut config = load_config(&common)?;
            if let Some(epochs) = epochs {
                config.train.epochs = epochs;
            }
            commands::ablate::run(&config, &data, &common.out)?;
        }
        Command::Gradcheck {
            common,
            break_gradients,
        } => {
            let config = load_config(&common)?;
            let worst = commands::gradcheck::run(&config, break_gradients)?;
            if worst >= commands::gradcheck::TOLERANCE {
                eprintln!(
                    "gradient check failed: max relative error {worst:e} at step {:e} (limit {:e})",
                    commands::gradcheck::STEP,
                    commands::gradcheck::TOLERANCE
                );
                return Ok(ExitCode::FAILURE);
            }
            eprintln!("gradient check passed: max relative error {worst:e}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
