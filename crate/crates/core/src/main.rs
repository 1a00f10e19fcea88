use std::path::PathBuf;
use std::process::ExitCode;

use alrite::experiment::{
    cmd_bounds, cmd_ensemble, cmd_evaluate, cmd_fit, cmd_generate, cmd_report, cmd_select, cmd_sweep, ExperimentConfig,
};
use alrite::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alrite", version, about = "Twin-pipeline CATE experiments")]
struct Cli {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for training and scoring.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write the dataset, its split and a manifest.
    Generate,
    /// Train the hyper-parameter sweep and score all candidates.
    Sweep,
    /// Train a single model with the `fit` settings.
    Fit,
    /// Evaluate the fitted model.
    Evaluate,
    /// Select a candidate per proxy metric.
    Select,
    /// Build top-K and softmax ensembles from the sweep.
    Ensemble,
    /// Compute PEHE upper bounds for the fitted model.
    Bounds,
    /// Summarize all artifacts of the run.
    Report,
}

fn load_config(cli: &Cli) -> alrite::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if cli.workers == Some(0) {
        return Err(Error::Config("--workers must be ≥ 1".into()));
    }
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> alrite::Result<Vec<PathBuf>> {
    let go = || match cli.command {
        Command::Generate => cmd_generate(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Fit => cmd_fit(cfg),
        Command::Evaluate => cmd_evaluate(cfg),
        Command::Select => cmd_select(cfg),
        Command::Ensemble => cmd_ensemble(cfg),
        Command::Bounds => cmd_bounds(cfg),
        Command::Report => cmd_report(cfg),
    };
    match cli.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("--workers: {e}")))?
            .install(go),
        None => go(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli, &cfg) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
