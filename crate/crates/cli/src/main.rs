use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use eddy_pint_cli::config::SignalChoice;
use eddy_pint_cli::{exit_code, run_experiment, CliError, Overrides, RunConfig};

/// Parallel-in-time eddy-current solver.
#[derive(Parser)]
#[command(name = "eddy-pint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver described by a configuration file.
    Run {
        config: PathBuf,
        /// Worker threads for the fine solves.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write M_sigma.mtx, K_nu.mtx and X_s.mtx.
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Sample an excitation signal over the configured time interval as `t,i` CSV.
    Excitation {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "fine")]
        level: Level,
        /// Number of samples.
        #[arg(long, default_value_t = 4001)]
        samples: usize,
        /// Output file; standard output if omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Fine,
    Coarse,
}

fn excitation(config: &Path, level: Level, samples: usize, output: Option<&Path>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    if samples < 2 {
        return Err(CliError::Config("at least 2 samples are required".into()));
    }
    let choice: SignalChoice = match level {
        Level::Fine => cfg.excitation.fine,
        Level::Coarse => cfg.excitation.coarse,
    };
    let sig = cfg.excitation.signal(choice)?;
    let (t0, t1) = (cfg.time.t_start, cfg.time.t_end);
    let mut csv = String::from("t,i\n");
    for j in 0..samples {
        let t = t0 + (t1 - t0) * j as f64 / (samples - 1) as f64;
        let _ = writeln!(csv, "{t:e},{:e}", sig.eval(t));
    }
    match output {
        Some(path) => std::fs::write(path, csv).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            workers,
            output,
            dump_matrices,
        } => {
            match run_experiment(
                &config,
                &Overrides {
                    workers,
                    output,
                    dump_matrices,
                },
            ) {
                Ok(outcome) => {
                    print!("{}", outcome.report.render());
                    let code = outcome.exit_code();
                    if code == exit_code::NOT_CONVERGED {
                        eprintln!("error: parareal did not converge within max_iter");
                    }
                    code
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Excitation {
            config,
            level,
            samples,
            output,
        } => match excitation(&config, level, samples, output.as_deref()) {
            Ok(()) => exit_code::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
