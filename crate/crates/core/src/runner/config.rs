use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::ConfigError;
use crate::control::{ControlSettings, UavDynamics};
use crate::network::{NetworkScenario, NetworkSettings, ProtocolConfig, ProtocolKind};
use crate::sensing::{GapPosition, SensingSettings, WaveformConfig};
use crate::Vec3;

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    output_dir: Option<String>,
    sensing: Option<RawSensing>,
    network: Option<RawNetwork>,
    control: Option<RawControl>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSensing {
    carrier_hz: Option<f64>,
    spacing_hz: Option<f64>,
    num_subcarriers: Option<usize>,
    gap_subcarriers: Option<usize>,
    gap_position: Option<RawGap>,
    snr_db_list: Option<Vec<f64>>,
    trials: Option<usize>,
    model_order: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawGap {
    Start(usize),
    Named(String),
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    arena: Option<[f64; 3]>,
    node_counts: Option<Vec<usize>>,
    speed_min: Option<f64>,
    speed_max: Option<f64>,
    comm_range_m: Option<f64>,
    sensing_range_m: Option<f64>,
    tick_s: Option<f64>,
    duration_s: Option<f64>,
    warmup_s: Option<f64>,
    events_per_trial: Option<usize>,
    protocols: Option<Vec<RawProtocol>>,
    trials: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    name: String,
    kind: String,
    interval_s: Option<f64>,
    expiry_s: Option<f64>,
    topology_flooding: Option<bool>,
    route_timeout_s: Option<f64>,
    flows: Option<usize>,
    min_interval_s: Option<f64>,
    max_interval_s: Option<f64>,
    speed_scaling: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawControl {
    bounds: Option<[f64; 3]>,
    obstacle_radius_list: Option<Vec<f64>>,
    obstacle_speed: Option<f64>,
    max_speed: Option<f64>,
    max_yaw_rate: Option<f64>,
    max_accel: Option<f64>,
    braking_response_s: Option<f64>,
    sensing_std_m: Option<f64>,
    iterations: Option<usize>,
    replan_iterations: Option<usize>,
    step_m: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
    timing_exclusive: Option<bool>,
}

/// Validated settings for every experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub sensing: SensingSettings,
    pub network: NetworkSettings,
    pub control: ControlSettings,
    /// `section.key` for every documented key that took its default.
    pub defaults_applied: Vec<String>,
    /// SHA-256 of the config text, hex.
    pub config_hash: String,
}

impl ExperimentConfig {
    /// Replaces the global seed and every section seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.sensing.seed = seed;
        self.network.seed = seed;
        self.control.seed = seed;
    }
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text, &path.display().to_string())
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, or of the section header.
fn locate(text: &str, section: &str, key: Option<&str>) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section && header.is_none() {
                header = Some(i + 1);
            }
            continue;
        }
        let in_section = current == section || current.starts_with(&format!("{section}."));
        if let (true, Some(k)) = (in_section, key) {
            if line.split('=').next().map(str::trim) == Some(k) && line.contains('=') {
                return Some(i + 1);
            }
        }
    }
    header
}

struct Ctx<'a> {
    text: &'a str,
    origin: &'a str,
    applied: Vec<String>,
}

impl Ctx<'_> {
    fn take<T>(&mut self, section: &str, key: &str, value: Option<T>, default: T) -> T {
        value.unwrap_or_else(|| {
            self.applied.push(if section.is_empty() { key.to_string() } else { format!("{section}.{key}") });
            default
        })
    }

    fn err(&self, section: &str, key: Option<&str>, message: impl Into<String>) -> ConfigError {
        ConfigError::Parse {
            path: self.origin.to_string(),
            line: locate(self.text, section, key),
            key: Some(match key {
                Some(k) => format!("{section}.{k}"),
                None => section.to_string(),
            }),
            message: message.into(),
        }
    }

    fn positive(&self, section: &str, key: &str, v: f64) -> Result<f64, ConfigError> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(section, Some(key), format!("must be positive, got {v}")))
        }
    }

    fn at_least(&self, section: &str, key: &str, v: usize, min: usize) -> Result<usize, ConfigError> {
        if v >= min {
            Ok(v)
        } else {
            Err(self.err(section, Some(key), format!("must be at least {min}, got {v}")))
        }
    }
}

/// Parses config text; `origin` names the source in error messages.
pub fn parse_config_str(text: &str, origin: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let key = message
            .split('`')
            .nth(1)
            .filter(|_| message.starts_with("unknown field"))
            .map(str::to_string);
        ConfigError::Parse {
            path: origin.to_string(),
            line: e.span().map(|s| line_of_offset(text, s.start)),
            key,
            message,
        }
    })?;
    let mut cx = Ctx { text, origin, applied: Vec::new() };
    let seed = cx.take("", "seed", raw.seed, 1);
    let output_dir = raw.output_dir.map(PathBuf::from);
    let sensing = sensing_settings(&mut cx, raw.sensing.unwrap_or_default(), seed)?;
    let network = network_settings(&mut cx, raw.network.unwrap_or_default(), seed)?;
    let control = control_settings(&mut cx, raw.control.unwrap_or_default(), seed)?;
    Ok(ExperimentConfig {
        seed,
        output_dir,
        sensing,
        network,
        control,
        defaults_applied: cx.applied,
        config_hash: config_hash(text),
    })
}

fn sensing_settings(cx: &mut Ctx, r: RawSensing, seed: u64) -> Result<SensingSettings, ConfigError> {
    const S: &str = "sensing";
    let d = SensingSettings::default();
    let carrier = cx.take(S, "carrier_hz", r.carrier_hz, d.waveform.carrier_frequency);
    let spacing = cx.take(S, "spacing_hz", r.spacing_hz, d.waveform.subcarrier_spacing);
    let n = cx.take(S, "num_subcarriers", r.num_subcarriers, d.waveform.num_subcarriers);
    let gap = cx.take(S, "gap_subcarriers", r.gap_subcarriers, d.gap_subcarriers);
    let gap_position = match cx.take(S, "gap_position", r.gap_position, RawGap::Named("central".into())) {
        RawGap::Start(i) => GapPosition::Start(i),
        RawGap::Named(s) if s == "central" => GapPosition::Central,
        RawGap::Named(s) => {
            return Err(cx.err(S, Some("gap_position"), format!("expected \"central\" or a start index, got {s:?}")))
        }
    };
    let snr_db_list = cx.take(S, "snr_db_list", r.snr_db_list, d.snr_db_list.clone());
    if snr_db_list.is_empty() || snr_db_list.iter().any(|s| !s.is_finite()) {
        return Err(cx.err(S, Some("snr_db_list"), "needs at least one finite SNR"));
    }
    let trials = cx.take(S, "trials", r.trials, d.trials);
    cx.at_least(S, "trials", trials, 1)?;
    let model_order = cx.take(S, "model_order", r.model_order, d.model_order);
    cx.at_least(S, "model_order", model_order, 1)?;
    let section_seed = cx.take(S, "seed", r.seed, seed);
    cx.positive(S, "carrier_hz", carrier)?;
    let waveform = WaveformConfig::new(carrier, spacing, n).map_err(|e| cx.err(S, Some("spacing_hz"), e.to_string()))?;
    let settings = SensingSettings {
        waveform,
        gap_subcarriers: gap,
        gap_position,
        snr_db_list,
        trials,
        model_order,
        seed: section_seed,
        ..d
    };
    let mask = settings.mask().map_err(|e| cx.err(S, Some("gap_subcarriers"), e.to_string()))?;
    if mask.occupied_count() < 2 * model_order {
        return Err(cx.err(S, Some("model_order"), format!(
            "{} observed subcarriers cannot support order {model_order}",
            mask.occupied_count()
        )));
    }
    Ok(settings)
}

fn protocol(cx: &Ctx, p: RawProtocol) -> Result<ProtocolConfig, ConfigError> {
    const S: &str = "network.protocols";
    let need = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| cx.err(S, Some(key), format!("protocol {} of kind {} needs {key}", p.name, p.kind)))
    };
    let kind = match p.kind.as_str() {
        "sensing-triggered" => ProtocolKind::SensingTriggered,
        "fixed-beacon" => ProtocolKind::FixedBeacon { interval: need(p.interval_s, "interval_s")? },
        "periodic-hello" => ProtocolKind::PeriodicHello {
            interval: need(p.interval_s, "interval_s")?,
            topology_flooding: p.topology_flooding.unwrap_or(false),
        },
        "on-demand" => ProtocolKind::OnDemand {
            route_timeout: need(p.route_timeout_s, "route_timeout_s")?,
            flows: p.flows.unwrap_or(4),
        },
        "adaptive-hello" => ProtocolKind::AdaptiveHello {
            min_interval: need(p.min_interval_s, "min_interval_s")?,
            max_interval: need(p.max_interval_s, "max_interval_s")?,
            speed_scaling: p.speed_scaling.unwrap_or(0.1),
        },
        other => {
            return Err(cx.err(S, Some("kind"), format!(
                "unknown protocol kind {other:?} (sensing-triggered, fixed-beacon, periodic-hello, on-demand, adaptive-hello)"
            )))
        }
    };
    let cfg = ProtocolConfig { name: p.name, kind, expiry: p.expiry_s };
    cfg.validate().map_err(|e| cx.err(S, Some("name"), e.to_string()))?;
    Ok(cfg)
}

fn network_settings(cx: &mut Ctx, r: RawNetwork, seed: u64) -> Result<NetworkSettings, ConfigError> {
    const S: &str = "network";
    let d = NetworkSettings::default();
    let sc = &d.scenario;
    let arena = cx.take(S, "arena", r.arena, [sc.arena.x, sc.arena.y, sc.arena.z]);
    let node_counts = cx.take(S, "node_counts", r.node_counts, d.node_counts.clone());
    if node_counts.is_empty() || node_counts.iter().any(|&n| n < 2) {
        return Err(cx.err(S, Some("node_counts"), "needs at least one count, each >= 2"));
    }
    let scenario = NetworkScenario {
        arena: Vec3::from(arena),
        speed_min: cx.take(S, "speed_min", r.speed_min, sc.speed_min),
        speed_max: cx.take(S, "speed_max", r.speed_max, sc.speed_max),
        comm_range: cx.take(S, "comm_range_m", r.comm_range_m, sc.comm_range),
        sensing_range: cx.take(S, "sensing_range_m", r.sensing_range_m, sc.sensing_range),
        tick: cx.take(S, "tick_s", r.tick_s, sc.tick),
        duration: cx.take(S, "duration_s", r.duration_s, sc.duration),
        warmup: cx.take(S, "warmup_s", r.warmup_s, sc.warmup),
        ..sc.clone()
    };
    scenario.validate().map_err(|e| cx.err(S, None, e.to_string()))?;
    let protocols = match r.protocols {
        Some(ps) => {
            if ps.is_empty() {
                return Err(cx.err(S, Some("protocols"), "needs at least one protocol"));
            }
            ps.into_iter().map(|p| protocol(cx, p)).collect::<Result<Vec<_>, _>>()?
        }
        None => {
            cx.applied.push(format!("{S}.protocols"));
            d.protocols.clone()
        }
    };
    let trials = cx.take(S, "trials", r.trials, d.trials);
    cx.at_least(S, "trials", trials, 1)?;
    let events_per_trial = cx.take(S, "events_per_trial", r.events_per_trial, d.events_per_trial);
    cx.at_least(S, "events_per_trial", events_per_trial, 1)?;
    Ok(NetworkSettings {
        scenario,
        node_counts,
        protocols,
        trials,
        events_per_trial,
        seed: cx.take(S, "seed", r.seed, seed),
    })
}

fn control_settings(cx: &mut Ctx, r: RawControl, seed: u64) -> Result<ControlSettings, ConfigError> {
    const S: &str = "control";
    let d = ControlSettings::default();
    let dd = UavDynamics::default();
    let bounds = cx.take(S, "bounds", r.bounds, [d.bounds.x, d.bounds.y, d.bounds.z]);
    for b in bounds {
        cx.positive(S, "bounds", b)?;
    }
    let radii = cx.take(S, "obstacle_radius_list", r.obstacle_radius_list, d.obstacle_radii.clone());
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(cx.err(S, Some("obstacle_radius_list"), "needs at least one positive radius"));
    }
    let pos = |cx: &mut Ctx, key: &str, v: Option<f64>, def: f64| {
        let v = cx.take(S, key, v, def);
        cx.positive(S, key, v)
    };
    let dynamics = UavDynamics {
        max_speed: pos(cx, "max_speed", r.max_speed, dd.max_speed)?,
        max_yaw_rate: pos(cx, "max_yaw_rate", r.max_yaw_rate, dd.max_yaw_rate)?,
        max_accel: pos(cx, "max_accel", r.max_accel, dd.max_accel)?,
        braking_response: pos(cx, "braking_response_s", r.braking_response_s, dd.braking_response)?,
        ..dd
    };
    let obstacle_speed = pos(cx, "obstacle_speed", r.obstacle_speed, d.obstacle_speed)?;
    let step = pos(cx, "step_m", r.step_m, d.step)?;
    let sensing_std = cx.take(S, "sensing_std_m", r.sensing_std_m, d.sensing_std);
    if !(sensing_std >= 0.0 && sensing_std.is_finite()) {
        return Err(cx.err(S, Some("sensing_std_m"), format!("must be non-negative, got {sensing_std}")));
    }
    let iterations = cx.take(S, "iterations", r.iterations, d.iterations);
    cx.at_least(S, "iterations", iterations, 1)?;
    let replan_iterations = cx.take(S, "replan_iterations", r.replan_iterations, d.replan_iterations);
    cx.at_least(S, "replan_iterations", replan_iterations, 1)?;
    let trials = cx.take(S, "trials", r.trials, d.trials);
    cx.at_least(S, "trials", trials, 1)?;
    let settings = ControlSettings {
        bounds: Vec3::from(bounds),
        obstacle_radii: radii,
        obstacle_speed,
        dynamics,
        sensing_std,
        iterations,
        replan_iterations,
        step,
        trials,
        seed: cx.take(S, "seed", r.seed, seed),
        timing_exclusive: cx.take(S, "timing_exclusive", r.timing_exclusive, d.timing_exclusive),
        ..d
    };
    settings.validate().map_err(|e| cx.err(S, None, e.to_string()))?;
    Ok(settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_only_config_takes_all_defaults() {
        let c = parse_config_str("seed = 7\n", "t.toml").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.sensing, SensingSettings { seed: 7, ..Default::default() });
        assert_eq!(c.network, NetworkSettings { seed: 7, ..Default::default() });
        assert_eq!(c.control, ControlSettings { seed: 7, ..Default::default() });
        assert!(c.defaults_applied.contains(&"control.timing_exclusive".to_string()));
        assert!(c.defaults_applied.contains(&"network.protocols".to_string()));
        assert!(!c.defaults_applied.contains(&"seed".to_string()));
        assert!(parse_config_str("", "t.toml").unwrap().defaults_applied.contains(&"seed".to_string()));
    }

    #[test]
    fn misspelled_key_is_named_with_its_line() {
        let text = "seed = 1\n[control]\ntrials = 3\nobstacle_radius = [20.0]\n";
        let e = parse_config_str(text, "t.toml").unwrap_err();
        match &e {
            ConfigError::Parse { line, key, .. } => {
                assert_eq!(*line, Some(4));
                assert_eq!(key.as_deref(), Some("obstacle_radius"));
            }
            other => panic!("{other:?}"),
        }
        assert!(e.to_string().contains("obstacle_radius"));
    }

    #[test]
    fn type_mismatch_and_invariants_name_the_key() {
        let e = parse_config_str("[sensing]\ntrials = \"many\"\n", "t.toml").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: Some(2), .. }), "{e:?}");
        let e = parse_config_str("[control]\nmax_accel = -1.0\n", "t.toml").unwrap_err();
        match e {
            ConfigError::Parse { line, key, .. } => {
                assert_eq!(line, Some(2));
                assert_eq!(key.as_deref(), Some("control.max_accel"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn protocols_parse_by_kind() {
        let text = r#"
[[network.protocols]]
name = "st"
kind = "sensing-triggered"

[[network.protocols]]
name = "fb"
kind = "fixed-beacon"
interval_s = 0.5
"#;
        let c = parse_config_str(text, "t.toml").unwrap();
        assert_eq!(c.network.protocols.len(), 2);
        assert_eq!(c.network.protocols[1].kind, ProtocolKind::FixedBeacon { interval: 0.5 });
        let bad = "[[network.protocols]]\nname = \"x\"\nkind = \"fixed-beacon\"\n";
        assert!(parse_config_str(bad, "t.toml").is_err());
    }

    #[test]
    fn identical_text_identical_hash() {
        let t = "seed = 3\n[control]\ntrials = 2\n";
        assert_eq!(parse_config_str(t, "a").unwrap().config_hash, parse_config_str(t, "b").unwrap().config_hash);
        assert_ne!(config_hash(t), config_hash("seed = 4\n"));
    }
}
