//! Command-line front end for the double-chain model.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "fkchain",
    version,
    about = "Incommensurate double-chain relaxation, hull functions, twist maps, and the matching atomistic model",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (default: io.out_dir from the config, else "fkchain-out").
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override model.beta from the config.
    #[arg(long, global = true, value_name = "X")]
    beta: Option<f64>,

    /// Supercell numerator (lower-chain atoms per cell).
    #[arg(long, global = true, value_name = "INT")]
    p: Option<i64>,

    /// Supercell denominator (upper-chain atoms per cell).
    #[arg(long, global = true, value_name = "INT")]
    q: Option<i64>,

    /// Largest approximant denominator for `converge`.
    #[arg(long, global = true, value_name = "INT")]
    qmax: Option<i64>,

    /// Worker threads for row-parallel studies (default: logical cores).
    #[arg(long, global = true, value_name = "INT")]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the tabulated substrate potential and save it.
    Table,
    /// Relax one supercell from the uniform state.
    Relax,
    /// Relax one supercell and emit its hull function.
    Hull,
    /// Relax every approximant up to --qmax and compare hulls against a
    /// high-order reference.
    Converge,
    /// Relax one supercell and rebuild the two-dimensional rippled curves.
    Reconstruct,
    /// Relax one supercell and iterate the induced twist map.
    Orbit,
    /// Relax the two-chain atomistic system.
    Atomistic,
    /// Relax the atomistic system and histogram interchain offsets.
    Disregistry,
    /// Validate the configuration and report the model conditions.
    Check,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                std::process::exit(0);
            }
            ErrorKind::InvalidSubcommand => {
                eprintln!("error: unknown command");
                let _ = e.print();
                std::process::exit(2);
            }
            _ => {
                let _ = e.print();
                std::process::exit(2);
            }
        },
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .ok();
    }
    let config_path = cli
        .config
        .ok_or_else(|| anyhow::anyhow!("every command needs --config PATH"))?;
    let ctx = commands::prepare(&config_path, cli.out, cli.beta, cli.p, cli.q, cli.qmax)?;
    match cli.command {
        Command::Table => commands::cmd_table(&ctx),
        Command::Relax => commands::cmd_relax(&ctx),
        Command::Hull => commands::cmd_hull(&ctx),
        Command::Converge => commands::cmd_converge(&ctx),
        Command::Reconstruct => commands::cmd_reconstruct(&ctx),
        Command::Orbit => commands::cmd_orbit(&ctx),
        Command::Atomistic => commands::cmd_atomistic(&ctx),
        Command::Disregistry => commands::cmd_disregistry(&ctx),
        Command::Check => commands::cmd_check(&ctx),
    }
}
