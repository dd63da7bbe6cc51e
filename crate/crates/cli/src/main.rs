//! Command-line pipeline: ingest raw tables, derive damage and recovery
//! metrics, fit the regression stack, sweep spatial reach, compute decay
//! coefficients, and emit report tables. See README for a walkthrough.

mod config;
mod report;
mod stages;
mod synth;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use config::PipelineConfig;
use stages::Failure;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spillover",
    version,
    about = "Spatial spillover analysis of damage and recovery data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory written by the pipeline.
    #[arg(long)]
    out: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write an annotated default configuration file.
    InitConfig {
        /// Where to write the config.
        #[arg(long, default_value = "config.toml")]
        path: PathBuf,
        /// Directory the generated input paths point into.
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Generate a synthetic dataset with planted ground truth.
    Synth {
        /// Scenario spec (JSON); a small demo scenario when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Output directory for the generated tables.
        #[arg(long)]
        out: PathBuf,
        /// Where to write the matching pipeline config
        /// (default: <out>/config.toml).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Load and validate the input tables.
    Ingest(StageArgs),
    /// Harmonize claims, match to parcels, aggregate damage metrics.
    Damage(StageArgs),
    /// Extract movement baselines and recovery rates.
    Recovery(StageArgs),
    /// Compute the control variables.
    Covariates(StageArgs),
    /// Correlations, collinearity, autocorrelation, and the regressions.
    Analyze(StageArgs),
    /// Distance-threshold sweep for spatial reach.
    Sweep(StageArgs),
    /// Spatial decay coefficients.
    Decay(StageArgs),
    /// Group heterogeneity tests on the decay field.
    Heterogeneity(StageArgs),
    /// Run every stage in order.
    RunAll(StageArgs),
    /// Render report tables from existing artifacts.
    Report {
        /// Artifact directory produced by the pipeline.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(args: &StageArgs) -> Result<PipelineConfig, Failure> {
    let mut config = PipelineConfig::load(&args.config).map_err(Failure::Validation)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run_stage_command(stage: &str, args: &StageArgs) -> Result<(), Failure> {
    let config = load_config(args)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(Failure::Stage)?;
    if stage == "run-all" {
        stages::run_all(&config, &args.out)
    } else {
        stages::run_stage(stage, &config, &args.out)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::InitConfig { path, data_dir } => {
            let config = PipelineConfig::default_for(&data_dir);
            let text = config.to_annotated_toml().map_err(Failure::Stage)?;
            std::fs::write(&path, text)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(Failure::Stage)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Synth {
            scenario,
            out,
            config,
        } => synth::run_synth(scenario.as_deref(), &out, config.as_deref()),
        Command::Ingest(args) => run_stage_command("ingest", &args),
        Command::Damage(args) => run_stage_command("damage", &args),
        Command::Recovery(args) => run_stage_command("recovery", &args),
        Command::Covariates(args) => run_stage_command("covariates", &args),
        Command::Analyze(args) => run_stage_command("analyze", &args),
        Command::Sweep(args) => run_stage_command("sweep", &args),
        Command::Decay(args) => run_stage_command("decay", &args),
        Command::Heterogeneity(args) => run_stage_command("heterogeneity", &args),
        Command::RunAll(args) => run_stage_command("run-all", &args),
        Command::Report { out } => {
            let written = report::run_report(&out).map_err(Failure::Stage)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
