use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::{GaussianArgs, OptimizeArgs, RandhamArgs, TdvpArgs, VarianceArgs};
use crate::error::CliResult;

/// Variational Monte Carlo with normalizing-flow trial states.
#[derive(Debug, Parser)]
#[command(name = "flowvmc", version = crate::VERSION)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a flow on a quartic Hamiltonian.
    Optimize(OptimizeArgs),
    /// Optimize the Gaussian baseline.
    Gaussian(GaussianArgs),
    /// Integrate the 1-D variational dynamics.
    TdvpDemo(TdvpArgs),
    /// Compare loss-estimator variances across the 1-D family.
    VarianceStudy(VarianceArgs),
    /// Write a random Hamiltonian as JSON.
    Randham(RandhamArgs),
}

/// Runs the parsed command and prints a one-line result.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Optimize(a) => {
            for s in commands::optimize(&a.resolve()?)? {
                println!("seed {}: energy {} ± {}", s.seed, s.energy, s.stderr);
            }
        }
        Command::Gaussian(a) => {
            for s in commands::gaussian(&a.resolve()?)? {
                match s.flow_energy {
                    Some(f) => println!("seed {}: gaussian {} flow {}", s.seed, s.energy, f),
                    None => println!("seed {}: gaussian {}", s.seed, s.energy),
                }
            }
        }
        Command::TdvpDemo(a) => {
            let s = commands::tdvp_demo(&a.resolve()?)?;
            println!(
                "max departure: vN {} TDSE {}",
                s.vn_max_departure, s.tdse_max_departure
            );
        }
        Command::VarianceStudy(a) => {
            let s = commands::variance_study(&a.resolve()?)?;
            println!(
                "max |z| vs closed form: canonical {} adjoint {}",
                s.max_z_canonical, s.max_z_adjoint
            );
        }
        Command::Randham(a) => {
            let cfg = a.resolve()?;
            commands::randham(&cfg)?;
            println!("wrote {}", cfg.out.display());
        }
    }
    Ok(())
}
