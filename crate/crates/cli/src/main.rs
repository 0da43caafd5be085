//! `bh`: command-line driver for the homogenization pipeline.
//!
//! Exit codes: 0 pass, 1 check failure, 2 config error, 3 artifact error.

use std::path::PathBuf;
use std::process::ExitCode;

use bh_core::config::RunConfig;
use bh_core::pipeline::{resolve_out_dir, Outcome, Pipeline};
use bh_core::{BhError, Exec};
use clap::{Parser, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bh",
    version,
    about = "Periodic homogenization with dynamic Laplace-Beltrami interface conditions"
)]
struct Cli {
    command: Command,
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides BH_OUTPUT_DIR and the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write legacy-VTK files.
    #[arg(long)]
    vtk: bool,
    /// Run the numerical kernels serially.
    #[arg(long)]
    serial: bool,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Build the interface-fitted cell mesh.
    Mesh,
    /// Solve the cell problems and report compatibility.
    Cell,
    /// Compute the effective tensors from the cell functions.
    Tensors,
    /// Solve the homogenized problem.
    Macro,
    /// Solve the ε-scale problem for every configured ε.
    Micro,
    /// Run the ε- and η-sweeps.
    Converge,
    /// Evaluate the invariant ledger.
    Verify,
}

fn exit_code(e: &BhError) -> u8 {
    match e {
        BhError::ConfigInvalid(_) => 2,
        BhError::MissingArtifact(_) | BhError::Parse { .. } | BhError::Io(_) => 3,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<Outcome, BhError> {
    let config = RunConfig::load(&cli.config)?;
    let out = resolve_out_dir(&config, cli.out.as_deref());
    let mut p = Pipeline::new(config, out);
    p.vtk = cli.vtk;
    p.exec = if cli.serial { Exec::Serial } else { Exec::Parallel };
    match cli.command {
        Command::Mesh => p.cmd_mesh(),
        Command::Cell => p.cmd_cell(),
        Command::Tensors => p.cmd_tensors(),
        Command::Macro => p.cmd_macro(),
        Command::Micro => p.cmd_micro(),
        Command::Converge => p.cmd_converge(),
        Command::Verify => p.cmd_verify(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => {
            for line in &o.summary {
                println!("{line}");
            }
            if o.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("bh: checks failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("bh: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
