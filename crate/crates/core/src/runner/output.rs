use std::path::Path;

use serde::Serialize;

use super::{ExperimentConfig, Subcommand, TOOL_VERSION};
use crate::control::ControlRecord;
use crate::network::NetRecord;
use crate::sensing::SensingRecord;

pub const SENSING_COLUMNS: [&str; 6] = ["method", "snr_db", "trial", "armse_m", "runtime_ms", "converged"];
pub const NETWORK_COLUMNS: [&str; 7] = [
    "protocol",
    "node_count",
    "trial",
    "mean_accuracy",
    "beacons_sent",
    "mean_update_time_s",
    "p95_update_time_s",
];
pub const CONTROL_COLUMNS: [&str; 8] = [
    "planner",
    "obstacle_radius_m",
    "trial",
    "replanning_delay_ms",
    "expansions",
    "path_length_m",
    "energy_j",
    "collided",
];
/// Wall-clock columns; they differ between otherwise identical runs.
pub const TIMING_COLUMNS: [&str; 2] = ["runtime_ms", "replanning_delay_ms"];

fn write_rows<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl Iterator<Item = [String; N]>,
) -> Result<(), String> {
    let fail = |e: &dyn std::fmt::Display| format!("{}: {e}", path.display());
    let mut w = csv::Writer::from_path(path).map_err(|e| fail(&e))?;
    w.write_record(header).map_err(|e| fail(&e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| fail(&e))?;
    }
    w.flush().map_err(|e| fail(&e))
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        x.to_string()
    }
}

pub fn write_sensing_csv(path: &Path, records: &[SensingRecord]) -> Result<(), String> {
    write_rows(
        path,
        SENSING_COLUMNS,
        records.iter().map(|r| {
            [
                r.method.label().to_string(),
                num(r.snr_db),
                r.trial.to_string(),
                num(r.armse_m),
                num(r.runtime_ms),
                r.converged.to_string(),
            ]
        }),
    )
}

pub fn write_network_csv(path: &Path, records: &[NetRecord]) -> Result<(), String> {
    write_rows(
        path,
        NETWORK_COLUMNS,
        records.iter().map(|r| {
            [
                r.protocol.clone(),
                r.node_count.to_string(),
                r.trial.to_string(),
                num(r.mean_accuracy),
                r.beacons_sent.to_string(),
                num(r.mean_update_time_s),
                num(r.p95_update_time_s),
            ]
        }),
    )
}

pub fn write_control_csv(path: &Path, records: &[ControlRecord]) -> Result<(), String> {
    write_rows(
        path,
        CONTROL_COLUMNS,
        records.iter().map(|r| {
            [
                r.planner.clone(),
                num(r.obstacle_radius_m),
                r.trial.to_string(),
                num(r.replanning_delay_ms),
                r.expansions.to_string(),
                num(r.path_length_m),
                num(r.energy_j),
                r.collided.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ExperimentEntry {
    pub name: String,
    pub status: String,
    pub records: usize,
    pub csv: Option<String>,
    pub runtime_s: f64,
    pub error: Option<String>,
}

impl ExperimentEntry {
    pub(crate) fn ok(name: &str, records: usize, csv: String, runtime_s: f64) -> Self {
        Self { name: name.into(), status: "ok".into(), records, csv: Some(csv), runtime_s, error: None }
    }

    pub(crate) fn failed(name: &str, runtime_s: f64, error: String) -> Self {
        Self { name: name.into(), status: "error".into(), records: 0, csv: None, runtime_s, error: Some(error) }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Manifest {
    pub tool_version: String,
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub sensing_seed: u64,
    pub network_seed: u64,
    pub control_seed: u64,
    pub parallel: usize,
    pub defaults_applied: Vec<String>,
    pub timing_columns: Vec<String>,
    pub experiments: Vec<ExperimentEntry>,
    pub started_unix_s: u64,
    pub total_runtime_s: f64,
}

impl Manifest {
    pub(crate) fn new(
        sub: Subcommand,
        config: &ExperimentConfig,
        parallel: usize,
        experiments: Vec<ExperimentEntry>,
        total_runtime_s: f64,
    ) -> Self {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            tool_version: TOOL_VERSION.into(),
            subcommand: sub.name().into(),
            config_hash: config.config_hash.clone(),
            seed: config.seed,
            sensing_seed: config.sensing.seed,
            network_seed: config.network.seed,
            control_seed: config.control.seed,
            parallel,
            defaults_applied: config.defaults_applied.clone(),
            timing_columns: TIMING_COLUMNS.iter().map(|s| s.to_string()).collect(),
            experiments,
            started_unix_s: now.saturating_sub(total_runtime_s as u64),
            total_runtime_s,
        }
    }

    pub fn all_ok(&self) -> bool {
        self.experiments.iter().all(|e| e.error.is_none())
    }

    pub(crate) fn write(&self, path: &Path) -> Result<(), String> {
        let text = serde_json::to_string_pretty(self).map_err(|e| e.to_string())?;
        std::fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
    }
}
