use rayon::prelude::*;

use super::discovery::run_discovery_with_snapshots;
use super::protocol::ProtocolConfig;
use super::scenario::NetworkScenario;
use super::update_time::{find_topology_event, measure_routing_update_time, EventKind};
use super::{NetworkError, Result};
use crate::seeds::SeedBuilder;
use crate::stats::{median, percentile};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSettings {
    /// Template scenario; `node_count` is overridden by each sweep point.
    pub scenario: NetworkScenario,
    pub node_counts: Vec<usize>,
    pub protocols: Vec<ProtocolConfig>,
    pub trials: usize,
    pub seed: u64,
    /// Topology events injected per trial (alternating break / formation).
    pub events_per_trial: usize,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        Self {
            scenario: NetworkScenario::default(),
            node_counts: vec![20, 40, 60, 80],
            protocols: ProtocolConfig::standard_set(),
            trials: 10,
            seed: 1,
            events_per_trial: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetRecord {
    pub protocol: String,
    pub node_count: usize,
    pub trial: usize,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub mean_recall: f64,
    pub beacons_sent: u64,
    pub beacons_received: u64,
    /// One entry per injected event; `None` is a censored measurement.
    pub update_times: Vec<Option<f64>>,
    /// Mean over uncensored events (NaN when there are none).
    pub mean_update_time_s: f64,
    pub p95_update_time_s: f64,
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    SeedBuilder::new(seed, "net/trial").int(trial as u64).finish()
}

fn run_point(settings: &NetworkSettings, n: usize, trial: usize) -> Result<Vec<NetRecord>> {
    let scenario = NetworkScenario { node_count: n, ..settings.scenario.clone() };
    let seed = trial_seed(settings.seed, trial);
    let events = settings.events_per_trial;
    let window = scenario.duration - scenario.warmup;
    let times: Vec<f64> = (0..events)
        .map(|e| scenario.warmup + (e as f64 + 0.5) * window / events as f64)
        .collect();

    let mut runs = Vec::with_capacity(settings.protocols.len());
    for p in &settings.protocols {
        runs.push(run_discovery_with_snapshots(p, &scenario, seed, &times)?);
    }
    let snapshots = runs.first().map(|r| r.snapshots.clone()).unwrap_or_default();
    let topo_events: Vec<_> = snapshots
        .iter()
        .enumerate()
        .filter_map(|(e, snap)| {
            let kind = if e % 2 == 0 { EventKind::LinkBreak } else { EventKind::LinkFormation };
            let mut rng = SeedBuilder::new(seed, "net/event").int(e as u64).rng();
            find_topology_event(&snap.nodes, &scenario, kind, snap.time, &mut rng).map(|ev| (e, ev))
        })
        .collect();

    settings
        .protocols
        .iter()
        .zip(runs)
        .map(|(p, run)| {
            let update_times = topo_events
                .iter()
                .map(|(e, ev)| {
                    // detection draws shared across swarm sizes
                    let key = SeedBuilder::new(settings.seed, "net/detect")
                        .int(trial as u64)
                        .int(*e as u64)
                        .finish();
                    measure_routing_update_time(p, &scenario, ev, key).map(|o| o.seconds())
                })
                .collect::<Result<Vec<_>>>()?;
            let mut done: Vec<f64> = update_times.iter().flatten().copied().collect();
            done.sort_by(f64::total_cmp);
            let mean = if done.is_empty() { f64::NAN } else { done.iter().sum::<f64>() / done.len() as f64 };
            Ok(NetRecord {
                protocol: p.name.clone(),
                node_count: n,
                trial,
                mean_accuracy: run.mean_accuracy,
                min_accuracy: run.min_accuracy,
                mean_recall: run.mean_recall,
                beacons_sent: run.beacons_sent,
                beacons_received: run.beacons_received,
                update_times,
                mean_update_time_s: mean,
                p95_update_time_s: percentile(&done, 0.95),
            })
        })
        .collect()
}

/// Full factorial sweep over node counts, protocols and trials. Within a
/// trial all protocols and node counts share trajectories (node `i` moves the
/// same in every swarm that contains it), injected events and detection
/// draws. Output is
/// ordered by node count, trial, then protocol.
pub fn run_network_experiment(settings: &NetworkSettings) -> Result<Vec<NetRecord>> {
    if settings.protocols.is_empty() || settings.node_counts.is_empty() {
        return Err(NetworkError::InvalidInput("need at least one protocol and node count".into()));
    }
    for p in &settings.protocols {
        p.validate()?;
    }
    let cells: Vec<(usize, usize)> = settings
        .node_counts
        .iter()
        .flat_map(|&n| (0..settings.trials).map(move |t| (n, t)))
        .collect();
    let out: Vec<Vec<NetRecord>> = cells
        .par_iter()
        .map(|&(n, t)| run_point(settings, n, t))
        .collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetSummary {
    pub protocol: String,
    pub node_count: usize,
    pub trials: usize,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub mean_recall: f64,
    pub mean_beacons_sent: f64,
    pub events: usize,
    pub censored: usize,
    pub median_update_time_s: f64,
    pub p95_update_time_s: f64,
}

/// Aggregates records per (protocol, node count), in first-seen order.
pub fn summarize_network(records: &[NetRecord]) -> Vec<NetSummary> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in records {
        let k = (r.protocol.clone(), r.node_count);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(protocol, node_count)| {
            let rs: Vec<&NetRecord> = records
                .iter()
                .filter(|r| r.protocol == protocol && r.node_count == node_count)
                .collect();
            let k = rs.len() as f64;
            let all: Vec<Option<f64>> = rs.iter().flat_map(|r| r.update_times.iter().copied()).collect();
            let mut done: Vec<f64> = all.iter().flatten().copied().collect();
            done.sort_by(f64::total_cmp);
            NetSummary {
                trials: rs.len(),
                mean_accuracy: rs.iter().map(|r| r.mean_accuracy).sum::<f64>() / k,
                min_accuracy: rs.iter().map(|r| r.min_accuracy).fold(f64::INFINITY, f64::min),
                mean_recall: rs.iter().map(|r| r.mean_recall).sum::<f64>() / k,
                mean_beacons_sent: rs.iter().map(|r| r.beacons_sent as f64).sum::<f64>() / k,
                events: all.len(),
                censored: all.iter().filter(|t| t.is_none()).count(),
                median_update_time_s: median(&mut done.clone()),
                p95_update_time_s: percentile(&done, 0.95),
                protocol,
                node_count,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_is_deterministic_and_complete() {
        let settings = NetworkSettings {
            scenario: NetworkScenario { duration: 14.0, warmup: 4.0, ..Default::default() },
            node_counts: vec![20, 30],
            trials: 2,
            events_per_trial: 4,
            ..Default::default()
        };
        let a = run_network_experiment(&settings).unwrap();
        assert_eq!(a.len(), 2 * 2 * 6);
        let b = run_network_experiment(&settings).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        for r in &a {
            assert!((0.0..=1.0).contains(&r.mean_accuracy));
            assert!(r.beacons_received <= r.beacons_sent * (r.node_count as u64 - 1));
        }
    }
}
