use super::{ControlError, Result};
use crate::Vec3;

/// Rotary-wing propulsion power as a function of forward speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    /// Blade profile power in hover, W.
    pub profile_power: f64,
    /// Induced power in hover, W.
    pub induced_power: f64,
    /// Rotor blade tip speed, m/s.
    pub tip_speed: f64,
    /// Mean rotor induced velocity in hover, m/s.
    pub induced_velocity: f64,
    pub fuselage_drag_ratio: f64,
    /// Air density, kg/m³.
    pub air_density: f64,
    pub rotor_solidity: f64,
    /// Rotor disc area, m².
    pub rotor_area: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            profile_power: 79.86,
            induced_power: 88.63,
            tip_speed: 120.0,
            induced_velocity: 4.03,
            fuselage_drag_ratio: 0.6,
            air_density: 1.225,
            rotor_solidity: 0.05,
            rotor_area: 0.503,
        }
    }
}

impl PowerModel {
    /// Power draw in W at forward speed `v`.
    pub fn power(&self, v: f64) -> f64 {
        let v2 = v * v;
        let blade = self.profile_power * (1.0 + 3.0 * v2 / (self.tip_speed * self.tip_speed));
        let v02 = self.induced_velocity * self.induced_velocity;
        let induced = self.induced_power * ((1.0 + v2 * v2 / (4.0 * v02 * v02)).sqrt() - v2 / (2.0 * v02)).max(0.0).sqrt();
        let parasite = 0.5 * self.fuselage_drag_ratio * self.air_density * self.rotor_solidity * self.rotor_area * v2 * v.abs();
        blade + induced + parasite
    }

    pub fn hover_energy(&self, seconds: f64) -> f64 {
        self.power(0.0) * seconds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpeedProfile {
    Constant(f64),
    /// One speed per path segment.
    PerSegment(Vec<f64>),
}

/// Energy in J to fly `path` segment by segment at the given speeds.
pub fn path_energy(path: &[Vec3], speeds: &SpeedProfile, model: &PowerModel) -> Result<f64> {
    let segments = path.len().saturating_sub(1);
    let speed_of = |k: usize| match speeds {
        SpeedProfile::Constant(v) => *v,
        SpeedProfile::PerSegment(vs) => vs[k],
    };
    if let SpeedProfile::PerSegment(vs) = speeds {
        if vs.len() != segments {
            return Err(ControlError::InvalidInput(format!(
                "{} speeds for {segments} segments",
                vs.len()
            )));
        }
    }
    let mut total = 0.0;
    for (k, w) in path.windows(2).enumerate() {
        let len = (w[1] - w[0]).norm();
        if len == 0.0 {
            continue;
        }
        let v = speed_of(k);
        if !(v > 0.0 && v.is_finite()) {
            return Err(ControlError::InvalidInput(format!("segment {k} needs a positive speed, got {v}")));
        }
        total += model.power(v) * len / v;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hover_power_is_profile_plus_induced() {
        let m = PowerModel::default();
        assert!((m.power(0.0) - (79.86 + 88.63)).abs() < 1e-12);
        assert!((m.hover_energy(10.0) - 1684.9).abs() < 1e-9);
    }

    #[test]
    fn power_curve_has_an_interior_minimum() {
        let m = PowerModel::default();
        let p: Vec<f64> = (0..=30).map(|v| m.power(v as f64)).collect();
        let (k, _) = p.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!(k > 0 && k < 30, "{k}");
        assert!(p[30] > p[0]);
    }

    #[test]
    fn energy_is_additive_over_segments() {
        let m = PowerModel::default();
        let path = [Vec3::zeros(), Vec3::new(30.0, 0.0, 0.0), Vec3::new(30.0, 40.0, 0.0), Vec3::new(30.0, 40.0, 10.0)];
        let speeds = SpeedProfile::PerSegment(vec![10.0, 15.0, 5.0]);
        let whole = path_energy(&path, &speeds, &m).unwrap();
        let parts: f64 = (0..3)
            .map(|k| path_energy(&path[k..k + 2], &SpeedProfile::Constant([10.0, 15.0, 5.0][k]), &m).unwrap())
            .sum();
        assert!((whole - parts).abs() < 1e-9 * whole);
        assert_eq!(path_energy(&[Vec3::zeros(), Vec3::zeros()], &SpeedProfile::Constant(10.0), &m).unwrap(), 0.0);
        assert_eq!(path_energy(&[], &SpeedProfile::Constant(10.0), &m).unwrap(), 0.0);
        assert!(path_energy(&path, &SpeedProfile::Constant(0.0), &m).is_err());
    }
}
