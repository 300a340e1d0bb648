use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lsr_cli::config::Config;
use lsr_cli::{check, experiment};

/// Level-set reconstruction of piecewise non-constant coefficients in 2D
/// elliptic inverse problems.
#[derive(Parser)]
#[command(name = "lsr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ground-truth phantom fields.
    Phantom {
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the forward problem and write the clean measurement trace.
    Forward {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full reconstruction and write all artifacts.
    Invert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one reconstruction per noise level and write the summary table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated relative noise levels, largest first.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.04, 0.02, 0.01])]
        deltas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant and oracle battery.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> lsr_cli::Result<ExitCode> {
    match cli.command {
        Command::Phantom { config, out } => {
            let cfg = Config::load(&config)?;
            let dir = experiment::emit_phantom(&cfg, out.as_deref())?;
            println!("phantom written to {}", dir.display());
        }
        Command::Forward { config, out } => {
            let cfg = Config::load(&config)?;
            let dir = experiment::emit_forward(&cfg, out.as_deref())?;
            println!("clean data written to {}", dir.display());
        }
        Command::Invert { config, out } => {
            let cfg = Config::load(&config)?;
            let outcome = experiment::run_experiment(&cfg, out.as_deref())?;
            let s = &outcome.summary;
            println!(
                "stop {:?} after {} iterations: residual {:.4e}, relative L1 error {:.4}",
                s.stop_reason, s.iterations, s.final_misfit, s.l1_error_u
            );
            println!("artifacts in {}", outcome.out_dir.display());
        }
        Command::Sweep { config, deltas, out } => {
            let cfg = Config::load(&config)?;
            let rows = experiment::sweep_noise(&cfg, &deltas, out.as_deref())?;
            let mut failures = 0;
            for row in &rows {
                match row {
                    Ok(s) => println!(
                        "delta {:.4}: alpha {:.3e}, misfit {:.4e}, L1 error {:.4}, {} iterations ({:?})",
                        s.delta_rel, s.alpha, s.final_misfit, s.l1_error_u, s.iterations, s.stop_reason
                    ),
                    Err(msg) => {
                        eprintln!("failed: {msg}");
                        failures += 1;
                    }
                }
            }
            if failures > 0 {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Check => {
            if !check::run_checks() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
