//! `ms-stability`: batch stability analysis from a JSON configuration.
//!
//! Exit codes: 0 success (or strictly stable), 1 error, 2 validation or comparison
//! mismatch, 3 unstable, 4 marginal.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use ms_stability::second_variation::Restriction;

#[derive(Parser)]
#[command(name = "ms-stability", version, about = "Strict-stability analysis of Mumford-Shah critical pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file (default: `output.path` from the config, else stdout).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Worker threads for lattice sweeps.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Grid override.
    #[arg(long, global = true, value_name = "NX,NY", value_parser = config::parse_grid)]
    grid: Option<config::GridConfig>,

    /// Restriction override.
    #[arg(long, global = true, value_parser = parse_restriction)]
    restriction: Option<Restriction>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve, check criticality, compute λ₁ (and μ) and decide stability.
    Analyze,
    /// CSV sweep of the (a, b) lattice in `geometry.lattice`.
    PhaseDiagram,
    /// Finite-difference check of the second variation along a vertical flow.
    Validate,
    /// Numeric mode eigenvalues and fields against the closed forms.
    Compare,
    /// Closed-form values only.
    Oracle,
}

fn parse_restriction(s: &str) -> Result<Restriction, String> {
    s.parse().map_err(|e: ms_stability::Error| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let Some(path) = &cli.config else {
        anyhow::bail!("--config PATH is required");
    };
    let mut cfg = config::load(path)?;
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    if let Some(r) = cli.restriction {
        cfg.eigen.restriction = r;
    }
    if cli.jobs == Some(0) {
        anyhow::bail!("--jobs must be at least 1");
    }
    let outcome = match cli.command {
        Command::Analyze => commands::analyze(&cfg)?,
        Command::PhaseDiagram => commands::phase_diagram(&cfg, cli.jobs)?,
        Command::Validate => commands::validate(&cfg)?,
        Command::Compare => commands::compare(&cfg)?,
        Command::Oracle => commands::oracle(&cfg)?,
    };
    let out = cli.out.as_deref().or(cfg.output.path.as_deref());
    output::emit(out, &outcome.document)?;
    if cfg.output.table {
        if let Some(t) = &outcome.table {
            eprint!("{t}");
        }
    }
    Ok(outcome.code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
