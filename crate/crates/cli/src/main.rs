use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use contractlab_cli::{run, Mode, Overrides};

/// Sequential-bonus contract experiments.
#[derive(Debug, Parser)]
#[command(name = "contractlab", version)]
struct Args {
    mode: Mode,

    #[arg(long)]
    config: PathBuf,

    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    eps: Option<f64>,

    #[arg(long)]
    seed: Option<u64>,
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("CONTRACTLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("CONTRACTLAB_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Err(msg) = init_threads() {
        eprintln!("contractlab: {msg}");
        return ExitCode::from(2);
    }
    let overrides = Overrides {
        out: args.out,
        eps: args.eps,
        seed: args.seed,
    };
    match run(args.mode, &args.config, &overrides) {
        Ok(dir) => {
            println!("{} run written to {}", args.mode.name(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("contractlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
