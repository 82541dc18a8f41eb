use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fkwalk_cli::config::{self, LoadedConfig, Overrides};
use fkwalk_cli::output::write_atomic;
use fkwalk_cli::{commands, CliError};

#[derive(Parser)]
#[command(name = "fkwalk", version = fkwalk_cli::output::version(), about = "Monte Carlo and finite-difference solvers for nonlocal-in-time diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Target time; repeat to give several. Replaces `run.times`.
    #[arg(long = "time", value_name = "T")]
    times: Vec<f64>,
}

impl RunArgs {
    fn load(&self) -> Result<LoadedConfig, CliError> {
        let o = Overrides {
            seed: self.seed,
            trials: self.trials,
            out: self.out.clone(),
            times: self.times.clone(),
        };
        config::load(&self.config, &o)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo estimate on every interior grid point.
    RunMc(RunArgs),
    /// Finite-difference reference (truncated or atomic kernel).
    RunFd(RunArgs),
    /// Exact slice recursion for the atomic kernel.
    RunOracle(RunArgs),
    /// Heat kernel of the fractional kernel on an (r, y) grid.
    RunHeatkernel(RunArgs),
    /// Pointwise check |mean - ref| <= tol + z*stderr.
    Compare {
        mc: PathBuf,
        reference: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[arg(long, default_value_t = 4.0)]
        z: f64,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Jump weights for given alpha, delta, k.
    Weights {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        k: f64,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn print_paths<P: AsRef<std::path::Path>>(paths: &[P]) {
    for p in paths {
        println!("{}", p.as_ref().display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::RunMc(a) => print_paths(&commands::run_mc(&a.load()?)?),
        Command::RunFd(a) => print_paths(&commands::run_fd(&a.load()?)?),
        Command::RunOracle(a) => print_paths(&commands::run_oracle(&a.load()?)?),
        Command::RunHeatkernel(a) => {
            for (p, mass) in commands::run_heatkernel(&a.load()?)? {
                println!("{}\tmass = {mass:.17e}", p.display());
            }
        }
        Command::Compare {
            mc,
            reference,
            tol,
            z,
            out,
        } => {
            let report = commands::compare(&mc, &reference, tol, z, out.as_deref())?;
            print!("{}", report.render());
            if !report.pass() {
                return Err(CliError::ComparisonFailed);
            }
        }
        Command::Weights { alpha, delta, k, out } => {
            let csv = commands::weights_csv(alpha, delta, k)?;
            match out {
                Some(dir) => {
                    let path = dir.join("weights.csv");
                    write_atomic(&path, &csv)?;
                    println!("{}", path.display());
                }
                None => std::io::stdout().write_all(&csv)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::ComparisonFailed) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
