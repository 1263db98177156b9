//! `morphoseek` command-line harness.
//!
//! Exit codes: 0 when everything passed (or something was found), 1 when a
//! relation was violated or discovery found nothing, 2 for usage,
//! configuration and file-format errors.

mod commands;
mod config;
mod error;
mod files;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use morphoseek::kernel::{GridDims, Kernel};
use morphoseek::relations::Space;

use crate::config::{FileConfig, Overrides, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "morphoseek", version, about = "Discover, verify and replay metamorphic relations of an energy diagnostic")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML file with run settings; flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Implementation under test: cyclic or noncyclic
    #[arg(long, global = true, value_name = "KERNEL")]
    kernel: Option<Kernel>,
    /// Grid as TxNYxNX
    #[arg(long, global = true, value_name = "TxNYxNX")]
    grid: Option<GridDims>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print machine-readable JSON instead of a table
    #[arg(long, global = true)]
    json: bool,
    /// Maximum relative error for a PASS
    #[arg(long, global = true, value_name = "FLOAT")]
    tolerance: Option<f64>,
    /// Number of held-out random states per relation
    #[arg(long, global = true, value_name = "INT")]
    holdout: Option<usize>,
    /// Disable parallel evaluation
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the catalogue of known symmetries against a kernel
    Symmetries,
    /// Search for new relations and write them to the output directory
    Discover {
        /// Parameter space: diagonal, signed-perm-scale or dense
        #[arg(long)]
        space: Option<Space>,
        #[arg(long, value_name = "N")]
        max_relations: Option<usize>,
        /// Cost-evaluation budget over the whole run
        #[arg(long, value_name = "N")]
        max_evaluations: Option<u64>,
    },
    /// Re-validate relation files, or replay a test bundle
    Verify {
        #[arg(required_unless_present = "bundle", conflicts_with = "bundle")]
        files: Vec<PathBuf>,
        #[arg(long, value_name = "PATH")]
        bundle: Option<PathBuf>,
    },
    /// Evaluate relations against two kernels and list the discriminating ones
    Compare {
        files: Vec<PathBuf>,
        /// Include the catalogue of known symmetries
        #[arg(long)]
        catalogue: bool,
        /// Second kernel (default noncyclic)
        #[arg(long, value_name = "KERNEL")]
        against: Option<Kernel>,
    },
    /// Write a self-contained regression bundle
    EmitTests {
        files: Vec<PathBuf>,
        #[arg(long)]
        catalogue: bool,
        /// Bundle path (default <out>/bundle.json)
        #[arg(long, value_name = "PATH")]
        bundle: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let c = &cli.common;
    let file = match &c.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut flags = Overrides {
        seed: c.seed,
        kernel: c.kernel,
        grid: c.grid,
        out: c.out.clone(),
        sequential: c.sequential,
        tolerance: c.tolerance,
        holdout: c.holdout,
        ..Overrides::default()
    };
    match &cli.command {
        Command::Discover {
            space,
            max_relations,
            max_evaluations,
        } => {
            flags.space = *space;
            flags.max_relations = *max_relations;
            flags.max_evaluations = *max_evaluations;
        }
        Command::Compare { against, .. } => flags.against = *against,
        _ => {}
    }
    let cfg = RunConfig::resolve(&file, &flags)?;
    let json = c.json;

    match &cli.command {
        Command::Symmetries => commands::symmetries(&cfg, json),
        Command::Discover { .. } => commands::discover_cmd(&cfg, json),
        Command::Verify {
            bundle: Some(path), ..
        } => commands::replay(&cfg, &flags, path, c.kernel, json),
        Command::Verify { files, .. } => commands::verify(&cfg, files, json),
        Command::Compare { files, catalogue, .. } => commands::compare(&cfg, files, *catalogue, json),
        Command::EmitTests {
            files,
            catalogue,
            bundle,
        } => commands::emit_tests(&cfg, files, *catalogue, bundle.as_deref(), json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
