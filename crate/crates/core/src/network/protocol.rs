use super::{NetworkError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolKind {
    /// Beacon only when a sensed track crosses the communication boundary.
    SensingTriggered,
    /// Periodic kinematic beacons carrying the sender's one-hop table.
    FixedBeacon { interval: f64 },
    /// Identity-only hellos; `topology_flooding` marks link-state flooding.
    PeriodicHello { interval: f64, topology_flooding: bool },
    /// Neighbors are learned only from route-request floods.
    OnDemand { route_timeout: f64, flows: usize },
    /// Hello interval shrinks linearly with own speed.
    AdaptiveHello { min_interval: f64, max_interval: f64, speed_scaling: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub name: String,
    pub kind: ProtocolKind,
    /// Entry lifetime without refresh; `None` uses the protocol default.
    pub expiry: Option<f64>,
}

impl ProtocolConfig {
    pub fn new(name: impl Into<String>, kind: ProtocolKind) -> Result<Self> {
        let cfg = Self {
            name: name.into(),
            kind,
            expiry: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NetworkError::InvalidInput(format!("protocol {}: {m}", self.name)));
        match self.kind {
            ProtocolKind::SensingTriggered => {}
            ProtocolKind::FixedBeacon { interval } | ProtocolKind::PeriodicHello { interval, .. } => {
                if !(interval > 0.0) {
                    return bad(format!("interval must be positive, got {interval}"));
                }
            }
            ProtocolKind::OnDemand { route_timeout, flows } => {
                if !(route_timeout > 0.0) || flows == 0 {
                    return bad("route timeout and flow count must be positive".into());
                }
            }
            ProtocolKind::AdaptiveHello { min_interval, max_interval, speed_scaling } => {
                if !(min_interval > 0.0 && min_interval <= max_interval) || !(speed_scaling >= 0.0) {
                    return bad(format!("need 0 < min <= max, got [{min_interval}, {max_interval}]"));
                }
            }
        }
        if let Some(e) = self.expiry {
            if !(e > 0.0) {
                return bad(format!("expiry must be positive, got {e}"));
            }
        }
        Ok(())
    }

    /// Entry lifetime: three intervals for periodic protocols, the route
    /// timeout for on-demand, unbounded for sensing-triggered.
    pub fn expiry_for_interval(&self, interval: f64) -> f64 {
        self.expiry.unwrap_or(3.0 * interval)
    }

    /// Beacon period of a node moving at `speed`, if the protocol beacons
    /// periodically.
    pub fn beacon_interval(&self, speed: f64) -> Option<f64> {
        match self.kind {
            ProtocolKind::SensingTriggered => None,
            ProtocolKind::FixedBeacon { interval } | ProtocolKind::PeriodicHello { interval, .. } => Some(interval),
            ProtocolKind::OnDemand { route_timeout, flows } => Some(route_timeout / flows as f64),
            ProtocolKind::AdaptiveHello { min_interval, max_interval, speed_scaling } => {
                let f = (speed_scaling * speed).clamp(0.0, 1.0);
                Some(max_interval - (max_interval - min_interval) * f)
            }
        }
    }

    /// The six protocols of the comparison.
    pub fn standard_set() -> Vec<ProtocolConfig> {
        let mk = |n: &str, k| ProtocolConfig::new(n, k).expect("static parameters");
        vec![
            mk("sensing-triggered", ProtocolKind::SensingTriggered),
            mk("fixed-beacon", ProtocolKind::FixedBeacon { interval: 0.25 }),
            mk("olsr", ProtocolKind::PeriodicHello { interval: 2.0, topology_flooding: true }),
            mk("aodv", ProtocolKind::OnDemand { route_timeout: 3.0, flows: 4 }),
            mk("ee-hello", ProtocolKind::AdaptiveHello { min_interval: 0.5, max_interval: 2.0, speed_scaling: 0.1 }),
            mk("adaptive-hello-b", ProtocolKind::AdaptiveHello { min_interval: 1.0, max_interval: 4.0, speed_scaling: 0.1 }),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_interval_is_linear_in_speed() {
        let p = ProtocolConfig::new("a", ProtocolKind::AdaptiveHello { min_interval: 0.5, max_interval: 2.0, speed_scaling: 0.1 }).unwrap();
        assert_eq!(p.beacon_interval(0.0), Some(2.0));
        assert_eq!(p.beacon_interval(5.0), Some(1.25));
        assert_eq!(p.beacon_interval(10.0), Some(0.5));
        assert_eq!(p.beacon_interval(40.0), Some(0.5));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ProtocolConfig::new("x", ProtocolKind::FixedBeacon { interval: 0.0 }).is_err());
        assert!(ProtocolConfig::new("x", ProtocolKind::AdaptiveHello { min_interval: 2.0, max_interval: 1.0, speed_scaling: 0.1 }).is_err());
        assert!(ProtocolConfig::new("x", ProtocolKind::OnDemand { route_timeout: 3.0, flows: 0 }).is_err());
        assert_eq!(ProtocolConfig::standard_set().len(), 6);
    }
}
