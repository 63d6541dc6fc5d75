use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use liutype_nb::cli_io::{
    check_theorems_command, fit_command, simulate_command, sweep_command, CheckConfig, FitConfig,
    SimulateConfig, SimulateGrid, SweepConfig,
};
use liutype_nb::risk_analysis::SweepParam;
use liutype_nb::shrinkage_selectors::DEFAULT_SAFETY;
use liutype_nb::{Error, Result};

#[derive(Parser)]
#[command(name = "liutype-nb", version, about = "Liu-type shrinkage estimators for negative binomial regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    data: PathBuf,
    /// Name of the count response column
    #[arg(long)]
    response: String,
    /// Overdispersion; estimated from the response moments when omitted
    #[arg(long)]
    theta: Option<f64>,
    /// Fraction of the d bound used for LT
    #[arg(long, default_value_t = DEFAULT_SAFETY)]
    safety: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    K,
    D,
}

#[derive(Subcommand)]
enum Command {
    /// Fit MLE, RR, LE and LT and print coefficients, standard errors and MSE
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Z-score predictors before fitting
        #[arg(long)]
        standardize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo comparison of the estimators
    Simulate {
        /// Run the full 36-cell factor grid
        #[arg(long, conflicts_with_all = ["n", "p", "rho", "theta"])]
        paper_grid: bool,
        #[arg(long, required_unless_present = "paper_grid")]
        n: Option<usize>,
        #[arg(long, required_unless_present = "paper_grid")]
        p: Option<usize>,
        #[arg(long, required_unless_present = "paper_grid")]
        rho: Option<f64>,
        #[arg(long, required_unless_present = "paper_grid")]
        theta: Option<f64>,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SAFETY)]
        safety: f64,
        /// Worker threads (defaults to all cores)
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plug-in MSE curves over k (LT, RR) or d (LE)
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long, default_value_t = 0.01)]
        from: f64,
        #[arg(long, default_value_t = 0.99)]
        to: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the MMSE superiority conditions of LT at (k, d)
    CheckTheorems {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        d: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { data, standardize, out } => {
            let report = fit_command(&FitConfig {
                data: data.data,
                response: data.response,
                theta: data.theta,
                standardize,
                safety: data.safety,
                out,
            })?;
            print!("{report}");
        }
        Command::Simulate { paper_grid, n, p, rho, theta, reps, seed, safety, workers, out } => {
            let grid = if paper_grid {
                SimulateGrid::Paper
            } else {
                match (n, p, rho, theta) {
                    (Some(n), Some(p), Some(rho), Some(theta)) => SimulateGrid::Cell { n, p, rho, theta },
                    _ => return Err(Error::Usage("--n, --p, --rho and --theta are required without --paper-grid".into())),
                }
            };
            let config = SimulateConfig { grid, reps, seed, safety, workers, out };
            simulate_command(&config)?;
            eprintln!("wrote {}", config.out.display());
        }
        Command::Sweep { data, param, from, to, step, out } => {
            let config = SweepConfig {
                data: data.data,
                response: data.response,
                theta: data.theta,
                param: match param {
                    Param::K => SweepParam::K,
                    Param::D => SweepParam::D,
                },
                from,
                to,
                step,
                safety: data.safety,
                out,
            };
            sweep_command(&config)?;
            eprintln!("wrote {}", config.out.display());
        }
        Command::CheckTheorems { data, k, d } => {
            let report = check_theorems_command(&CheckConfig {
                data: data.data,
                response: data.response,
                theta: data.theta,
                k,
                d,
                safety: data.safety,
            })?;
            print!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
