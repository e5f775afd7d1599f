//! crlab: batch front-end for the cylinder Cauchy-Riemann laboratory.
//!
//! Pipelines: generate or solve fields, trace winding numbers of pairs,
//! classify limit behaviour, and check the Lyapunov-function axioms, all
//! driven by a declarative TOML config.

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};
use commands::exit_code;
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "crlab", version, about = "cylinder Cauchy-Riemann laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find 1-periodic orbits of u_t = F(t, u) by Newton shooting.
    Equilibria {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the cylinder boundary-value problem.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the limit behaviour of a computed solution window.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the winding-number axioms on a family of solutions.
    Axioms {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "solution", required = true)]
        solutions: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Materialize analytic test fields.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0x5EED)]
        seed: u64,
    },
    /// Export loop CSVs from solution artifacts for plotting.
    PlotData {
        #[arg(long = "solution", required = true)]
        solutions: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "sigma")]
        sigmas: Vec<f64>,
    },
}

fn load_config(path: &PathBuf) -> Result<(RunConfig, String), i32> {
    RunConfig::load(path).map_err(|err| {
        eprintln!("config error: {err:#}");
        exit_code::CONFIG
    })
}

fn out_dir(cli: &Option<PathBuf>, config: Option<&RunConfig>) -> PathBuf {
    cli.clone()
        .or_else(|| config.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Equilibria { config, out } => match load_config(config) {
            Ok((cfg, text)) => {
                commands::cmd_equilibria(&cfg, &text, &out_dir(out, Some(&cfg)))
            }
            Err(code) => return code,
        },
        Command::Solve { config, out } => match load_config(config) {
            Ok((cfg, text)) => commands::cmd_solve(&cfg, &text, &out_dir(out, Some(&cfg))),
            Err(code) => return code,
        },
        Command::Classify { config, solution, out } => match load_config(config) {
            Ok((cfg, text)) => {
                commands::cmd_classify(&cfg, &text, solution, &out_dir(out, Some(&cfg)))
            }
            Err(code) => return code,
        },
        Command::Axioms { config, solutions, out } => match load_config(config) {
            Ok((cfg, text)) => {
                commands::cmd_axioms(&cfg, &text, solutions, &out_dir(out, Some(&cfg)))
            }
            Err(code) => return code,
        },
        Command::Generate { config, out, seed } => match load_config(config) {
            Ok((cfg, text)) => {
                commands::cmd_generate(&cfg, &text, &out_dir(out, Some(&cfg)), *seed)
            }
            Err(code) => return code,
        },
        Command::PlotData { solutions, out, sigmas } => {
            commands::cmd_plot_data(solutions, sigmas, &out_dir(out, None))
        }
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code::CONFIG
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run() as u8)
}
