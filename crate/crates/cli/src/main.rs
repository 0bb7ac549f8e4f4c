use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mutsel_cli::commands::{self, Context};
use mutsel_cli::config::{load_config, RunConfig};
use mutsel_cli::{verify, CliError};

/// Simulate and analyse the house-of-cards selection-mutation model.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; fig1, fig2 and regimes fall back to the
    /// reference setup (ε = 0.01, I = [-1.5, 1.5], gaussian σ² = 10).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `outputs` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write gnuplot scripts next to the CSV files.
    #[arg(long, global = true)]
    emit_gnuplot: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate the model and write snapshots and the mass history.
    Simulate,
    /// Dominant eigenvalue and eigenvectors as JSON.
    Spectrum,
    /// Solution against Γ₁ and Γ₂ at the eight figure times.
    Fig1,
    /// L¹ error curves against Γ₁, Γ₂ and λψ.
    Fig2,
    /// Classify (ε, t) cells by the better-matching profile.
    Regimes,
    /// Convergence rate of λ_ε to its second-order expansion.
    Rates,
    /// Run the invariant suite.
    Verify,
}

fn config(cli: &Cli, required: bool) -> Result<Option<RunConfig>, CliError> {
    match &cli.config {
        Some(path) => load_config(path).map(Some),
        None if required => Err(CliError::Config { path: String::new(), message: "--config is required".into() }),
        None => Ok(None),
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config { path: "--threads".into(), message: e.to_string() })?;
    }
    if let Command::Verify = cli.command {
        let checks = verify::run_suite();
        for c in &checks {
            println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        if !failed.is_empty() {
            return Err(CliError::Acceptance(format!("failed checks: {}", failed.join(", "))));
        }
        return Ok(());
    }
    let required = matches!(cli.command, Command::Simulate | Command::Spectrum);
    let cfg = config(cli, required)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.outputs.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context { out, emit_gnuplot: cli.emit_gnuplot };
    let or_reference = || cfg.clone().unwrap_or_else(RunConfig::reference_setup);
    let summary = match cli.command {
        Command::Simulate => commands::simulate(cfg.as_ref().unwrap(), &ctx)?,
        Command::Spectrum => commands::spectrum(cfg.as_ref().unwrap(), &ctx)?,
        Command::Fig1 => commands::fig1(&or_reference(), &ctx)?,
        Command::Fig2 => commands::fig2(&or_reference(), &ctx)?,
        Command::Regimes => commands::regimes(&or_reference(), &ctx)?,
        Command::Rates => commands::rates(cfg.as_ref(), &ctx)?,
        Command::Verify => unreachable!(),
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary is serializable"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MUTSEL_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
