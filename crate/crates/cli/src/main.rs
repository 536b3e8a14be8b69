use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fwno_core::run::{execute_run, oracle_report, sample_checkpoint, Checkpoint, RunConfig, Summary};
use fwno_core::trainer::StepOutcome;
use fwno_core::Error;

/// Flow-based architecture search over wavelet/activation stacks.
#[derive(Parser)]
#[command(name = "fwno", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the flow networks and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides training.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress progress lines on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Sample architectures from a trained checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact reward-proportional distribution, optionally compared with a checkpoint.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Rollouts drawn from the checkpoint for the empirical comparison.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// CSV of visited architectures ranked by reward.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::TrainConfig(_) | Error::InvalidSpace(_) => 2,
        Error::TooManyFailures { .. } | Error::Evaluator(_) | Error::NonDeterministicEvaluator(_) => 3,
        Error::Checkpoint { .. } => 4,
        Error::EnumerationTooLarge { .. } => 5,
        _ => 1,
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn train(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>, quiet: bool) -> Result<(), Error> {
    let mut cfg = RunConfig::load(&config)?;
    if let Some(seed) = seed {
        cfg.training.seed = seed;
    }
    let dir = cfg.resolve_output_dir(out.as_deref());
    let total = cfg.training.iterations;
    let every = (total / 10).max(1);
    let mut done = 0;
    let art = execute_run(&cfg, &dir, |outcome| {
        done += 1;
        if quiet {
            return;
        }
        match outcome {
            StepOutcome::Skipped(s) => eprintln!("iteration {} skipped: {}", s.iteration, s.error),
            StepOutcome::Updated { records } if done % every == 0 || done == total => {
                let mean = records.iter().map(|r| r.loss).sum::<f64>() / records.len() as f64;
                eprintln!("iteration {done}/{total} mean loss {mean:.4e}");
            }
            StepOutcome::Updated { .. } => {}
        }
    })?;
    print_json(&serde_json::json!({
        "run_dir": art.dir,
        "best": art.summary.best.architecture,
        "reward": art.summary.best.reward,
        "iterations": art.summary.iterations,
        "skipped_iterations": art.summary.skipped_iterations,
    }))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            quiet,
        } => train(config, seed, out, quiet),
        Command::Sample { checkpoint, count, seed } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            print_json(&sample_checkpoint(&ckpt, count, seed)?)
        }
        Command::Oracle {
            config,
            checkpoint,
            samples,
            seed,
        } => {
            let cfg = RunConfig::load(&config)?;
            let ckpt = checkpoint.as_deref().map(Checkpoint::load).transpose()?;
            print_json(&oracle_report(&cfg, ckpt.as_ref(), samples, seed)?)
        }
        Command::Report { run } => {
            let summary = Summary::load(&run.join("summary.json"))?;
            print!("{}", summary.to_csv());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fwno: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
