//! Config loading, experiment dispatch and result files.

mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

pub use config::{config_hash, parse_config, parse_config_str, ExperimentConfig};
pub use output::{
    write_control_csv, write_network_csv, write_sensing_csv, ExperimentEntry, Manifest, CONTROL_COLUMNS,
    NETWORK_COLUMNS, SENSING_COLUMNS, TIMING_COLUMNS,
};

use crate::control::control_records;
use crate::control::run_control_experiment_detailed;
use crate::network::run_network_experiment;
use crate::sensing::run_sensing_experiment;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}{}: {}{message}", line.map(|l| format!(":{l}")).unwrap_or_default(), key.as_ref().map(|k| format!("key `{k}`: ")).unwrap_or_default())]
    Parse {
        path: String,
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Sense,
    Network,
    Control,
    All,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sense => "sense",
            Self::Network => "network",
            Self::Control => "control",
            Self::All => "all",
        }
    }

    fn experiments(self) -> &'static [&'static str] {
        match self {
            Self::Sense => &["sensing"],
            Self::Network => &["network"],
            Self::Control => &["control"],
            Self::All => &["sensing", "network", "control"],
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "sense" => Ok(Self::Sense),
            "network" => Ok(Self::Network),
            "control" => Ok(Self::Control),
            "all" => Ok(Self::All),
            other => Err(ConfigError::InvalidInput(format!("unknown subcommand {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads; 1 runs everything on one thread.
    pub parallel: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output: {0}")]
    Output(String),
}

/// Runs the selected experiments, writes one CSV each plus `manifest.json`.
/// Experiment failures are recorded in the manifest rather than returned;
/// check [`Manifest::all_ok`].
pub fn run(sub: Subcommand, config: &ExperimentConfig, opts: &RunOptions) -> Result<Manifest, RunError> {
    if opts.parallel == 0 {
        return Err(ConfigError::InvalidInput("parallel must be at least 1".into()).into());
    }
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| RunError::Output(format!("{}: {e}", opts.out_dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallel)
        .build()
        .map_err(|e| RunError::Output(e.to_string()))?;
    let started = Instant::now();
    let mut entries = Vec::new();
    for &name in sub.experiments() {
        let t0 = Instant::now();
        let csv = format!("{name}.csv");
        let path = opts.out_dir.join(&csv);
        let result = pool.install(|| run_one(name, config, &path));
        let runtime_s = t0.elapsed().as_secs_f64();
        entries.push(match result {
            Ok(records) => ExperimentEntry::ok(name, records, csv, runtime_s),
            Err(e) => ExperimentEntry::failed(name, runtime_s, e),
        });
    }
    let manifest = Manifest::new(sub, config, opts.parallel, entries, started.elapsed().as_secs_f64());
    manifest.write(&opts.out_dir.join("manifest.json")).map_err(RunError::Output)?;
    Ok(manifest)
}

fn run_one(name: &str, config: &ExperimentConfig, path: &Path) -> Result<usize, String> {
    match name {
        "sensing" => {
            let rs = run_sensing_experiment(&config.sensing).map_err(|e| e.to_string())?;
            write_sensing_csv(path, &rs)?;
            Ok(rs.len())
        }
        "network" => {
            let rs = run_network_experiment(&config.network).map_err(|e| e.to_string())?;
            write_network_csv(path, &rs)?;
            Ok(rs.len())
        }
        "control" => {
            let details = run_control_experiment_detailed(&config.control).map_err(|e| e.to_string())?;
            let rs = control_records(&details);
            write_control_csv(path, &rs)?;
            Ok(rs.len())
        }
        other => Err(format!("unknown experiment {other}")),
    }
}
