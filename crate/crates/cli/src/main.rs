use anyhow::{Context, Result};
use cfrp_core::losses::{GammaUnits, WeightFunction};
use cfrp_core::pipeline::{
    cmd_accuracy, cmd_dataset, cmd_gen, cmd_inspect, cmd_metrics, cmd_render, cmd_simulate, PipelineConfig,
    RunOptions, StageReport,
};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Exit status when some samples failed and `--allow-partial` is off.
const PARTIAL_EXIT: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "cfrp", version, about = "Fiber composite microstructure-to-failure data pipeline")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Key-value config file. Later stages default to `<out>/config.used`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Exit 0 even when some samples fail.
    #[arg(long, global = true)]
    allow_partial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate fiber arrangements.
    Gen {
        /// Number of samples; overrides the config file.
        #[arg(short, long)]
        n: Option<usize>,
    },
    /// Simulate transverse tension on every generated arrangement.
    Simulate,
    /// Render microstructure, stress and crack images.
    Render,
    /// Split, augment and write the dataset.
    Dataset,
    /// MAE and attention losses between paired prediction and target images.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// CSV report path.
        #[arg(long, default_value = "metrics.csv")]
        report: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        alpha: f64,
        #[arg(long, default_value_t = 60.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = Units::Fraction)]
        gamma_units: Units,
    },
    /// Side-by-side sheets and a label template for visual inspection.
    Inspect {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Output directory for the sheets.
        #[arg(long, default_value = "inspect")]
        sheets: PathBuf,
    },
    /// Accuracy from a filled-in label file.
    Accuracy { labels: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Units {
    Fraction,
    Raw,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let used = cli.out.join("config.used");
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None if used.exists() => PipelineConfig::load(&used)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn finish(stage: &str, report: StageReport, out: &Path, allow_partial: bool) -> ExitCode {
    println!(
        "{stage}: {} of {} samples ok (manifest {})",
        report.total - report.failed,
        report.total,
        out.join(format!("manifest_{stage}.jsonl")).display()
    );
    if report.all_ok() || allow_partial {
        ExitCode::SUCCESS
    } else {
        eprintln!("{stage}: {} samples failed", report.failed);
        ExitCode::from(PARTIAL_EXIT)
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let opts = RunOptions { jobs: cli.jobs };
    let out = cli.out.as_path();
    match &cli.command {
        Command::Gen { n } => {
            let mut config = load_config(&cli)?;
            if let Some(n) = n {
                config.n_samples = *n;
            }
            let report = cmd_gen(&config, out, opts).context("gen")?;
            Ok(finish("gen", report, out, cli.allow_partial))
        }
        Command::Simulate => {
            let report = cmd_simulate(&load_config(&cli)?, out, opts).context("simulate")?;
            Ok(finish("simulate", report, out, cli.allow_partial))
        }
        Command::Render => {
            let report = cmd_render(&load_config(&cli)?, out, opts).context("render")?;
            Ok(finish("render", report, out, cli.allow_partial))
        }
        Command::Dataset => {
            let n = cmd_dataset(&load_config(&cli)?, out).context("dataset")?;
            println!("dataset: {n} records in {}", out.join("dataset/manifest.jsonl").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Metrics { pred, target, report, alpha, beta, gamma, gamma_units } => {
            let weights = WeightFunction {
                alpha: *alpha,
                beta: *beta,
                gamma: *gamma,
                units: match gamma_units {
                    Units::Fraction => GammaUnits::Fraction,
                    Units::Raw => GammaUnits::Raw,
                },
                ..WeightFunction::default()
            };
            let rows = cmd_metrics(pred, target, &weights, report).context("metrics")?;
            println!("metrics: {} pairs written to {}", rows.len(), report.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Inspect { pred, target, sheets } => {
            let n = cmd_inspect(pred, target, sheets).context("inspect")?;
            println!("inspect: {n} sheets, label template {}", sheets.join("labels.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Accuracy { labels } => {
            let a = cmd_accuracy(labels).context("accuracy")?;
            println!("{a}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
