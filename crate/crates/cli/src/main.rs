use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ipla::experiment::{
    parse_overrides, run_experiment, run_prox_bench, theory_csv, theory_report, theory_table, ConfigBuilder,
    ExperimentConfig, ExperimentError, PROX_BENCH_DEFAULTS,
};

/// Environment variable naming the directory that relative `output` paths
/// are resolved against.
const OUTPUT_ROOT_VAR: &str = "IPLA_OUTPUT_ROOT";

const KEYS_HELP: &str = "\
Every configuration key can be set as a flag with its dotted name, e.g.
  --experiment example1 --sampler ula --d 10 --prox.kappa 2 --q-v 3
Hyphens in flag names become underscores. Precedence, lowest first:
built-in defaults, experiment preset, --config file, flags.";

#[derive(Parser)]
#[command(name = "ipla", version, about = "Inexact proximal Langevin experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV / image outputs.
    #[command(after_help = KEYS_HELP)]
    Run(Args),
    /// Print K(tau), the moment constants and the step-size budgets.
    #[command(after_help = KEYS_HELP)]
    Theory {
        /// Print CSV instead of an aligned table.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        args: Args,
    },
    /// Prox iteration counts against the accuracy target.
    #[command(after_help = KEYS_HELP)]
    ProxBench(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Configuration overrides as `--key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

fn resolve(args: &Args, defaults: Option<&str>) -> Result<ExperimentConfig, ExperimentError> {
    let mut overrides = args.overrides.clone();
    let mut config = args.config.clone();
    // `--config` given after the first override lands in the trailing list.
    if let Some(i) = overrides
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="))
    {
        let flag = overrides.remove(i);
        let path = match flag.split_once('=') {
            Some((_, p)) => p.to_string(),
            None if i < overrides.len() => overrides.remove(i),
            None => return Err(ExperimentError::Config("flag `--config` needs a value".into())),
        };
        config = Some(PathBuf::from(path));
    }
    let mut builder = ConfigBuilder::new();
    if let Some(d) = defaults {
        builder = builder.defaults(d)?;
    }
    if let Some(path) = &config {
        builder = builder.file(path)?;
    }
    builder.overrides(parse_overrides(&overrides)?)?.build()
}

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = resolve(&args, None)?;
            let out = run_experiment(&cfg, &output_root())?;
            print!("{}", out.table);
            println!("outputs: {}", out.dir.display());
        }
        Command::Theory { csv, args } => {
            let cfg = resolve(&args, Some("experiment = \"theory\""))?;
            let rows = theory_report(&cfg)?;
            if csv {
                print!("{}", theory_csv(&rows));
            } else {
                print!("{}", theory_table(&rows));
            }
        }
        Command::ProxBench(args) => {
            let cfg = resolve(&args, Some(PROX_BENCH_DEFAULTS))?;
            let out = run_prox_bench(&cfg, &output_root())?;
            print!("{}", out.table);
            println!("outputs: {}", out.dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
