use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use iscc_core::runner::{parse_config, run, RunError, RunOptions, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    Sense,
    Network,
    Control,
    All,
}

impl From<Experiment> for Subcommand {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::Sense => Subcommand::Sense,
            Experiment::Network => Subcommand::Network,
            Experiment::Control => Subcommand::Control,
            Experiment::All => Subcommand::All,
        }
    }
}

/// Runs ISCC swarm experiments and writes CSV results plus a manifest.
#[derive(Debug, Parser)]
#[command(name = "iscc-sim", version)]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; ISCC_SIM_OUT takes precedence when set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    parallel: u64,
    /// Overrides the global seed and every section seed.
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_EXPERIMENT: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match parse_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    let out_dir = std::env::var_os("ISCC_SIM_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or(cli.out)
        .or_else(|| config.output_dir.clone());
    let Some(out_dir) = out_dir else {
        eprintln!("error: no output directory (use --out, ISCC_SIM_OUT or output_dir)");
        return ExitCode::from(EXIT_CONFIG);
    };
    let opts = RunOptions { out_dir, parallel: cli.parallel as usize };
    match run(cli.experiment.into(), &config, &opts) {
        Ok(manifest) => {
            for e in &manifest.experiments {
                match &e.error {
                    None => eprintln!("{}: {} records in {:.2} s", e.name, e.records, e.runtime_s),
                    Some(err) => eprintln!("{}: failed: {err}", e.name),
                }
            }
            if manifest.all_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_EXPERIMENT)
            }
        }
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_EXPERIMENT)
        }
    }
}
