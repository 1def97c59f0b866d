use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use staf_cli::runner::{self, SeedOutcome};
use staf_cli::seeds::parse_seeds;
use staf_cli::{CliError, ExperimentConfig, ExperimentKind};

/// Simulate the state-following kernel controller on the regulation and
/// tracking benchmarks.
#[derive(Parser)]
#[command(name = "staf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment for one or more seeds.
    Run(RunArgs),
    /// Validate a config without running it.
    Check(CheckArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment; overrides the default and must agree with the config.
    experiment: Option<ExperimentKind>,

    /// JSON config; missing fields take the experiment defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Seeds: `3`, `1,4,9`, or an inclusive range `1..10`.
    #[arg(long)]
    seeds: Option<String>,

    /// Simulated time, seconds.
    #[arg(long)]
    duration: Option<f64>,

    /// Sampling interval, seconds.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Output directory; takes precedence over the config's `output_dir`.
    #[arg(long, env = "STAF_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Also print the effective config with every default filled in.
    #[arg(long)]
    print_config: bool,
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path, args.experiment)?,
        None => ExperimentConfig::from_json("{}", args.experiment)?,
    };
    if let Some(spec) = &args.seeds {
        config.seeds = parse_seeds(spec)?;
    }
    if let Some(d) = args.duration {
        config.sim.duration = d;
    }
    if let Some(dt) = args.dt {
        config.sim.dt = dt;
    }
    Ok(config)
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let config = load(&args.config)?;
    let out_dir = args
        .out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("staf-out"));
    let output = runner::run(&config, &out_dir)?;

    for o in &output.outcomes {
        match o {
            SeedOutcome::Completed { seed, record } => {
                let cost = record.get("total_cost").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
                let rms = record.get("steady_state_rms").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
                println!("seed {seed}: total cost {cost:.6}, steady-state RMS {rms:.3e}");
            }
            SeedOutcome::Aborted { seed, time, message } => match time {
                Some(t) => println!("seed {seed}: aborted at t = {t:.3} s ({message})"),
                None => println!("seed {seed}: aborted ({message})"),
            },
        }
    }
    println!("outputs in {}", output.out_dir.display());

    let failed: Vec<_> = output.failed().collect();
    if let Some(first) = failed.first() {
        let first = match first {
            SeedOutcome::Aborted { seed, message, .. } => format!("seed {seed}: {message}"),
            SeedOutcome::Completed { .. } => unreachable!(),
        };
        return Err(CliError::Numeric {
            failed: failed.len(),
            total: output.outcomes.len(),
            first,
        });
    }
    Ok(())
}

fn check(args: CheckArgs) -> Result<(), CliError> {
    let config = load(&args.config)?;
    print!("{}", runner::check(&config)?);
    if args.print_config {
        println!("{}", config.to_json());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Check(args) => check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
