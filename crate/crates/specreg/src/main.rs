//! Batch CLI over the library: `simulate`, `select`, `rates`, `bounds`,
//! and `verify`. Exit codes: 0 success, 2 config error, 3 numeric error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use specreg::harness::{self, ExperimentConfig, OutputFormat};
use specreg::Error;

#[derive(Parser)]
#[command(
    name = "specreg",
    version,
    about = "Iterative spectral regularization: seeded Monte Carlo experiments, adaptive stopping, and risk-bound calculators"
)]
struct Cli {
    /// Experiment config JSON (or bound parameter file for `bounds`);
    /// defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the base RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for the replicate fan-out (0 = library default).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Artifact format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded Monte Carlo experiment per configured sample size.
    Simulate,
    /// Select the stopping index on one simulated dataset; dump the trace.
    Select,
    /// Fit convergence-rate slopes across the configured sample sizes.
    Rates,
    /// Evaluate a risk or tail bound from a parameter file.
    Bounds,
    /// Run the built-in invariant and oracle checks.
    Verify,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.run.out_dir = out.display().to_string();
    }
    if let Some(workers) = cli.workers {
        cfg.run.workers = workers;
    }
    if let Some(format) = cli.format {
        cfg.run.format = match format {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate => {
            let cfg = load_config(cli)?;
            let files = harness::emit_simulate(&cfg)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Select => {
            let cfg = load_config(cli)?;
            let seed = cli.seed.unwrap_or(cfg.run.base_seed);
            let files = harness::emit_select(&cfg, seed)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Rates => {
            let cfg = load_config(cli)?;
            let files = harness::emit_rates(&cfg)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Bounds => {
            let request = cli.config.as_deref().ok_or_else(|| {
                Error::Config("bounds needs --config <parameter file>".into())
            })?;
            let out_dir = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("out"));
            let (report, path) = harness::emit_bound(request, &out_dir)?;
            println!("{:?} value = {}", report.kind, report.value);
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Verify => {
            let ok = harness::run_verification()?;
            if ok {
                Ok(())
            } else {
                Err(Error::Numeric("verification checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
