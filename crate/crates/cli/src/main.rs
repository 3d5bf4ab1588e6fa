use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mflow_cli::{parse_config, run_experiment, Kind, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "mflow", version, about = "Moduli flow experiments on flat periodic domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a tensor field and record diagnostics.
    Flow(Common),
    /// Perturb a parallel tensor and fit the decay rate.
    Stability(Common),
    /// Flow with the entropy monitor.
    Entropy(Common),
    /// Finite-difference check of the energy gradient.
    Gradcheck(Common),
    /// Moduli flow against the Willmore-type baseline.
    #[command(name = "willmore-compare")]
    WillmoreCompare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output] dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the final state here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Start from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_threads() -> Result<(), RunError> {
    let raw = match std::env::var("MFLOW_THREADS") {
        Ok(v) => v,
        Err(_) => return Ok(()),
    };
    let n: usize = raw.trim().parse().map_err(|_| RunError::Usage(format!("MFLOW_THREADS must be a non-negative integer, got `{raw}`")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Usage(format!("cannot start thread pool: {e}")))?;
        mflow_core::exec::set_parallel(true);
    }
    Ok(())
}

fn execute(kind: Kind, args: Common) -> Result<(), RunError> {
    configure_threads()?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| RunError::Usage(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if cfg.kind != kind {
        return Err(RunError::Usage(format!("config kind `{}` does not match subcommand `{}`", cfg.kind.name(), kind.name())));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    let opts = RunOptions { checkpoint: args.checkpoint, resume: args.resume };
    let art = run_experiment(&cfg, &opts)?;
    println!("{}", art.summary.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = RunError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(1);
        }
    };
    let (kind, args) = match cli.command {
        Command::Flow(a) => (Kind::Flow, a),
        Command::Stability(a) => (Kind::Stability, a),
        Command::Entropy(a) => (Kind::Entropy, a),
        Command::Gradcheck(a) => (Kind::Gradcheck, a),
        Command::WillmoreCompare(a) => (Kind::WillmoreCompare, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
