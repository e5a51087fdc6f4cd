use super::{NetworkError, Result, Vec3};

/// Swarm geometry, link model and simulation timing.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    pub arena: Vec3,
    pub node_count: usize,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Disk link radius, m. Distance exactly equal to the radius is a link.
    pub comm_range: f64,
    /// Recorded for reference; the link model is the disk above.
    pub sinr_threshold_db: f64,
    pub tx_power_w: f64,
    pub sensing_range: f64,
    pub scan_rate_hz: f64,
    /// Isotropic position noise of sensing observations, m.
    pub sensing_noise_std: f64,
    /// Width of the entry/exit band used when sensing is noisy, m.
    pub hysteresis_m: f64,
    pub tick: f64,
    pub duration: f64,
    /// Accuracy is averaged over `[warmup, duration]`.
    pub warmup: f64,
    pub beacon_airtime: f64,
}

impl Default for NetworkScenario {
    fn default() -> Self {
        Self {
            arena: Vec3::new(600.0, 600.0, 300.0),
            node_count: 20,
            speed_min: 5.0,
            speed_max: 10.0,
            comm_range: 156.0,
            sinr_threshold_db: -14.0,
            tx_power_w: 1.0,
            sensing_range: 1.2 * 156.0,
            scan_rate_hz: 20.0,
            sensing_noise_std: 0.0,
            hysteresis_m: 2.0,
            tick: 0.01,
            duration: 60.0,
            warmup: 10.0,
            beacon_airtime: 0.001,
        }
    }
}

impl NetworkScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NetworkError::InvalidInput(m));
        if self.arena.iter().any(|&a| !(a > 0.0)) {
            return bad(format!("arena dimensions must be positive, got {:?}", self.arena.as_slice()));
        }
        if self.node_count < 2 {
            return bad(format!("need at least 2 nodes, got {}", self.node_count));
        }
        if !(self.speed_min >= 0.0 && self.speed_max >= self.speed_min) {
            return bad(format!("invalid speed range [{}, {}]", self.speed_min, self.speed_max));
        }
        if !(self.comm_range > 0.0) {
            return bad(format!("comm range must be positive, got {}", self.comm_range));
        }
        if !(self.tick > 0.0) {
            return bad(format!("tick must be positive, got {}", self.tick));
        }
        if !(self.scan_rate_hz > 0.0) {
            return bad(format!("scan rate must be positive, got {}", self.scan_rate_hz));
        }
        if !(self.duration > 0.0 && self.warmup >= 0.0 && self.warmup < self.duration) {
            return bad(format!("need 0 <= warmup < duration, got {} / {}", self.warmup, self.duration));
        }
        if !(self.beacon_airtime > 0.0 && self.beacon_airtime < self.tick) {
            return bad(format!("beacon airtime must lie in (0, tick), got {}", self.beacon_airtime));
        }
        if !(self.sensing_noise_std >= 0.0 && self.hysteresis_m >= 0.0) {
            return bad("sensing noise and hysteresis must be non-negative".into());
        }
        Ok(())
    }

    /// Sensing-triggered discovery needs the sensing disk to cover the
    /// communication boundary.
    pub fn validate_for_sensing(&self) -> Result<()> {
        self.validate()?;
        if self.sensing_range < self.comm_range {
            return Err(NetworkError::InvalidInput(format!(
                "sensing range {} below comm range {}",
                self.sensing_range, self.comm_range
            )));
        }
        Ok(())
    }

    pub fn ticks(&self) -> usize {
        (self.duration / self.tick).round() as usize
    }

    /// Ticks between two sensing scans of one node.
    pub fn scan_ticks(&self) -> usize {
        ((1.0 / self.scan_rate_hz) / self.tick).round().max(1.0) as usize
    }

    pub fn scan_period(&self) -> f64 {
        self.scan_ticks() as f64 * self.tick
    }
}
