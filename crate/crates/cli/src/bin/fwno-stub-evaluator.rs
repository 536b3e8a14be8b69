use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use fwno_stub_evaluator::{generate_dataset, Action, OperatorDataset, ServeConfig, Server};

/// Reward evaluator speaking NDJSON on stdin/stdout.
#[derive(Parser)]
#[command(name = "fwno-stub-evaluator", version)]
struct Args {
    /// Grid points per sample.
    #[arg(long, default_value_t = 128)]
    grid: usize,
    /// Number of dataset samples.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Epochs used when a request carries no budget.
    #[arg(long, default_value_t = 20)]
    proxy_epochs: u32,
    /// Operator channel width.
    #[arg(long, default_value_t = 16)]
    width: usize,
    /// Dataset cache (.npz with arrays "input" and "output"); created if missing.
    #[arg(long)]
    dataset: Option<PathBuf>,

    #[arg(long, hide = true)]
    nondeterministic: bool,
    #[arg(long, hide = true)]
    concurrent_safe: bool,
    #[arg(long, hide = true)]
    fail_every: Option<u64>,
    #[arg(long, hide = true)]
    inconsistent: bool,
    #[arg(long, hide = true)]
    log_requests: bool,
    /// Stop answering after this many requests.
    #[arg(long, hide = true)]
    hang_after: Option<u64>,
    #[arg(long, hide = true, default_value_t = 0)]
    delay_ms: u64,
}

fn load_or_generate(args: &Args) -> Result<OperatorDataset, Box<dyn std::error::Error>> {
    match &args.dataset {
        Some(path) if path.exists() => {
            let ds = OperatorDataset::load_npz(path)?;
            if (ds.samples(), ds.grid()) != (args.samples, args.grid) {
                return Err(format!(
                    "{} holds {}x{}, flags ask for {}x{}",
                    path.display(),
                    ds.samples(),
                    ds.grid(),
                    args.samples,
                    args.grid
                )
                .into());
            }
            Ok(ds)
        }
        Some(path) => {
            let ds = generate_dataset(args.samples, args.grid, args.seed)?;
            ds.save_npz(path)?;
            Ok(ds)
        }
        None => Ok(generate_dataset(args.samples, args.grid, args.seed)?),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = load_or_generate(&args) {
        eprintln!("fwno-stub-evaluator: {e}");
        return ExitCode::from(2);
    }
    let mut server = Server::new(ServeConfig {
        seed: args.seed,
        width: args.width,
        proxy_epochs: args.proxy_epochs,
        deterministic: !args.nondeterministic,
        concurrent_safe: args.concurrent_safe,
        fail_every: args.fail_every,
        inconsistent: args.inconsistent,
        log_requests: args.log_requests,
    });
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if writeln!(out, "{}", server.hello()).and_then(|_| out.flush()).is_err() {
        return ExitCode::FAILURE;
    }
    let mut answered = 0u64;
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        match server.handle(&line) {
            Action::Shutdown => return ExitCode::SUCCESS,
            Action::Reply(lines) => {
                if args.hang_after.is_some_and(|n| answered >= n) {
                    continue;
                }
                answered += 1;
                std::thread::sleep(Duration::from_millis(args.delay_ms));
                for l in lines {
                    if writeln!(out, "{l}").is_err() {
                        return ExitCode::FAILURE;
                    }
                }
                if out.flush().is_err() {
                    return ExitCode::FAILURE;
                }
            }
        }
    }
    ExitCode::SUCCESS
}
