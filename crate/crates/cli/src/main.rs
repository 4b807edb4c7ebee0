use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use heatrm_cli::config::SolverSel;
use heatrm_cli::{run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "heatrm", version, about = "Crank-Nicolson heat solver with a Robbins-Monro linear solve")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Flat `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverArg>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// March the heat equation and write the field
    Solve,
    /// Refinement study against the analytic solution
    Order,
    /// Ensemble study of the stochastic solve: tail probabilities and decay rate
    RmStudy,
    /// Fit and check the product and sum bounds
    Bounds,
    /// Compare forward iterates with the closed-form error expansion
    RecursionCheck,
}

#[derive(ValueEnum, Clone, Copy)]
enum SolverArg {
    Direct,
    Rm,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            match RunConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(solver) = cli.solver {
        cfg.solver = match solver {
            SolverArg::Direct => SolverSel::Direct,
            SolverArg::Rm => SolverSel::Rm,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.display().to_string());
    }

    let command = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::Order => Command::Order,
        Cmd::RmStudy => Command::RmStudy,
        Cmd::Bounds => Command::Bounds,
        Cmd::RecursionCheck => Command::RecursionCheck,
    };

    let output = match run(command, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    for line in &output.summary {
        eprintln!("{line}");
    }
    match &cfg.output {
        Some(path) => {
            if let Err(e) = fs::write(path, &output.text) {
                eprintln!("error: cannot write {path}: {e}");
                return ExitCode::FAILURE;
            }
        }
        None => print!("{}", output.text),
    }
    ExitCode::SUCCESS
}
