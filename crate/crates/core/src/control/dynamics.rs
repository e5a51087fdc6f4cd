use super::{ControlError, Result};
use crate::Vec3;

/// Multiple of the sensing standard deviation added to a physical radius.
pub const INFLATION_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavDynamics {
    pub max_speed: f64,
    pub max_yaw_rate: f64,
    pub max_accel: f64,
    /// Time the braking system needs to respond.
    pub braking_response: f64,
    pub physical_radius: f64,
}

impl Default for UavDynamics {
    fn default() -> Self {
        Self {
            max_speed: 26.0,
            max_yaw_rate: 1.0,
            max_accel: 8.0,
            braking_response: 0.5,
            physical_radius: 0.5,
        }
    }
}

impl UavDynamics {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("max_speed", self.max_speed),
            ("max_yaw_rate", self.max_yaw_rate),
            ("max_accel", self.max_accel),
            ("braking_response", self.braking_response),
            ("physical_radius", self.physical_radius),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ControlError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Sensing-uncertainty inflation of a collision sphere.
pub fn inflation(sensing_std: f64) -> f64 {
    INFLATION_SIGMAS * sensing_std.max(0.0)
}

/// Circumscribed collision sphere, inflated for sensing uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentSphere {
    pub center: Vec3,
    pub equivalent_radius: f64,
}

impl EquivalentSphere {
    pub fn new(center: Vec3, physical_radius: f64, sensing_std: f64) -> Result<Self> {
        if !(physical_radius > 0.0) || !(sensing_std >= 0.0) {
            return Err(ControlError::InvalidInput(format!(
                "need radius > 0 and sensing std >= 0, got {physical_radius}, {sensing_std}"
            )));
        }
        Ok(Self {
            center,
            equivalent_radius: physical_radius + inflation(sensing_std),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inflation_grows_with_noise() {
        let a = EquivalentSphere::new(Vec3::zeros(), 2.0, 0.0).unwrap();
        let b = EquivalentSphere::new(Vec3::zeros(), 2.0, 0.5).unwrap();
        let c = EquivalentSphere::new(Vec3::zeros(), 2.0, 1.0).unwrap();
        assert_eq!(a.equivalent_radius, 2.0);
        assert!(b.equivalent_radius > a.equivalent_radius);
        assert!(c.equivalent_radius > b.equivalent_radius);
        assert!(EquivalentSphere::new(Vec3::zeros(), 0.0, 1.0).is_err());
    }

    #[test]
    fn default_dynamics_valid() {
        UavDynamics::default().validate().unwrap();
        let bad = UavDynamics { max_accel: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
