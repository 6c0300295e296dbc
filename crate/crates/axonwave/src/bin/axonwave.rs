//! Command-line front end for the axisymmetric wave solver.
//!
//! Exit codes: 0 on success, 2 for configuration/validation problems,
//! 3 when the linear solve itself fails.

use axonwave::config::{RunConfig, Workflow};
use axonwave::workflows;
use axonwave::Error;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "axonwave",
    about = "Axisymmetric time-harmonic wave solver with exact and absorbing-layer truncation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output root directory; results land in <out>/<run-name>/.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Suppress the summary printed to stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh-refinement convergence study against an exact outgoing mode.
    Converge {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the number of refinement levels from the config.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Axon-guiding simulation with energy-fraction reporting.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Cross-validate the absorbing layer against the exact truncation.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Suggest layer parameters for a target truncation error.
    Advise {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Singular(_) | Error::NonFinite => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    init_thread_pool();
    match cli.command {
        Command::Converge { common, levels } => {
            let mut config = load(&common, Workflow::Converge)?;
            if let Some(levels) = levels {
                config.mesh.levels = levels;
            }
            let outcome = workflows::run_converge(&config, &common.out)?;
            if !common.quiet {
                println!("converge '{}': {} level(s)", config.name, outcome.levels.len());
                for level in &outcome.levels {
                    println!(
                        "  h = {:.4e}  L2 = {:.6e}  H1 = {:.6e}",
                        level.h, level.weighted_l2, level.weighted_h1
                    );
                }
                match (outcome.l2_slope, outcome.h1_slope) {
                    (Some(l2), Some(h1)) => {
                        println!("  slopes: L2 = {l2:.3}, H1 = {h1:.3}");
                    }
                    _ => println!("  slopes: need at least two levels"),
                }
            }
        }
        Command::Simulate { common } => {
            let config = load(&common, Workflow::Simulate)?;
            let outcome = workflows::run_simulate(&config, &common.out)?;
            if !common.quiet {
                println!(
                    "simulate '{}': {} nodes, residual {:.2e}",
                    config.name, outcome.nodes, outcome.residual
                );
                if let Some(f) = outcome.fraction_axon {
                    println!("  energy fraction, axon core:  {f:.6}");
                }
                if let Some(f) = outcome.fraction_myelin {
                    println!("  energy fraction, sheath:     {f:.6}");
                }
                println!(
                    "  energy fraction, exterior:   {:.6}",
                    outcome.fraction_exterior
                );
                if let Some(f) = outcome.fraction_band {
                    println!("  energy fraction, report band: {f:.6}");
                }
            }
        }
        Command::Compare { common } => {
            let config = load(&common, Workflow::Compare)?;
            let outcome = workflows::run_compare(&config, &common.out)?;
            if !common.quiet {
                println!(
                    "compare '{}': kappa = {:.4e}",
                    config.name, outcome.kappa
                );
                for row in &outcome.rows {
                    println!(
                        "  chi0 = {:>8.3}  |diff|_U = {:.6e}  bound = {:.3e}",
                        row.chi0, row.u_diff, row.bound
                    );
                }
                for (m, change) in &outcome.truncation_rows {
                    println!("  M = {m}: change vs base = {change:.6e}");
                }
            }
        }
        Command::Advise { common } => {
            let config = load(&common, Workflow::Advise)?;
            let outcome = workflows::run_advise(&config, &common.out)?;
            if !common.quiet {
                println!(
                    "advise '{}': kappa = {:.4e}, floor chi0 >= {:.4e}, suggested chi0 = {:.4e}",
                    config.name, outcome.kappa, outcome.chi0_floor, outcome.suggested_chi0
                );
                for (chi0, thickness, bound) in &outcome.table {
                    println!(
                        "  chi0 = {chi0:>12.4e}  thickness = {thickness:>8.4}  bound = {bound:.3e}"
                    );
                }
            }
        }
    }
    Ok(())
}

fn load(common: &CommonArgs, expected: Workflow) -> Result<RunConfig, Error> {
    let config = RunConfig::from_file(&common.config)?;
    if config.workflow != expected {
        return Err(Error::Validation(format!(
            "config at {} declares workflow '{:?}', but the '{:?}' subcommand was invoked",
            common.config.display(),
            config.workflow,
            expected
        )));
    }
    config.validate()?;
    Ok(config)
}

/// Honour AXONWAVE_THREADS when the data-parallel feature is active.
fn init_thread_pool() {
    #[cfg(feature = "parallel")]
    if let Ok(n) = std::env::var("AXONWAVE_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}
