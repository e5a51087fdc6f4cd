use nalgebra::Matrix3;

use super::classify::EncounterClassification;
use super::dynamics::{EquivalentSphere, UavDynamics};
use super::ekf::{ekf_predict, KinematicTrack};
use super::{ControlError, Result};
use crate::Vec3;

/// Number of yaw-rate candidates spanning `[-max_yaw_rate, max_yaw_rate]`.
pub const YAW_CANDIDATES: usize = 21;
const MANEUVER_DT: f64 = 0.02;

pub fn min_safe_separation(
    a: &EquivalentSphere,
    b: &EquivalentSphere,
    closing_speed: f64,
    response: f64,
    prediction_error: f64,
) -> Result<f64> {
    if !(closing_speed >= 0.0 && response >= 0.0 && prediction_error >= 0.0) {
        return Err(ControlError::InvalidInput(format!(
            "separation terms must be non-negative: {closing_speed}, {response}, {prediction_error}"
        )));
    }
    Ok(a.equivalent_radius + b.equivalent_radius + closing_speed * response + prediction_error)
}

/// How `d_safe` is evaluated along a prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyPolicy {
    pub self_radius: f64,
    pub other_radius: f64,
    pub response_time: f64,
    /// Constant part of the trajectory prediction error, m.
    pub fixed_error: f64,
    /// Multiple of the predicted relative position standard deviation
    /// (square root of the summed position covariance traces) added to the error.
    pub error_sigmas: f64,
    /// Process noise used to propagate both tracks, m/s².
    pub process_noise: f64,
}

impl SafetyPolicy {
    fn error(&self, relative_cov: &Matrix3<f64>) -> f64 {
        self.fixed_error + self.error_sigmas * relative_cov.trace().max(0.0).sqrt()
    }

    fn separation(&self, closing: f64, error: f64) -> f64 {
        self.self_radius + self.other_radius + closing * self.response_time + error
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionPrediction {
    Clear,
    Breach { time_to_breach: f64, min_distance: f64 },
}

impl CollisionPrediction {
    pub fn is_breach(&self) -> bool {
        matches!(self, CollisionPrediction::Breach { .. })
    }
}

/// Own motion sample: position, velocity and position covariance.
pub(crate) type OwnSample = (Vec3, Vec3, Matrix3<f64>);

/// Breach search with an arbitrary own trajectory and a propagated track for
/// the other party.
pub(crate) fn predict_breach(
    mut own_at: impl FnMut(f64) -> OwnSample,
    other: &KinematicTrack,
    horizon: f64,
    step: f64,
    policy: &SafetyPolicy,
) -> Result<CollisionPrediction> {
    if !(horizon > 0.0) || !(step > 0.0) {
        return Err(ControlError::InvalidInput(format!("need horizon, step > 0: {horizon}, {step}")));
    }
    let steps = (horizon / step - 1e-9).ceil() as usize;
    let mut track = other.clone();
    let mut breach = None;
    let mut min_distance = f64::INFINITY;
    for k in 0..=steps {
        let t = (k as f64 * step).min(horizon);
        if k > 0 {
            let dt = t - ((k - 1) as f64 * step).min(horizon);
            track = ekf_predict(&track, dt, policy.process_noise)?;
        }
        let (p, v, cov) = own_at(t);
        let rel = track.position() - p;
        let rel_v = track.velocity() - v;
        let d = rel.norm();
        let closing = if d > 0.0 { (-rel.dot(&rel_v) / d).max(0.0) } else { rel_v.norm() };
        let d_safe = policy.separation(closing, policy.error(&(cov + track.position_covariance())));
        min_distance = min_distance.min(d);
        if breach.is_none() && d < d_safe {
            breach = Some(t);
        }
    }
    Ok(match breach {
        Some(time_to_breach) => CollisionPrediction::Breach { time_to_breach, min_distance },
        None => CollisionPrediction::Clear,
    })
}

/// Propagates both tracks under constant velocity and reports the first time
/// their center distance drops below the safe separation.
pub fn predict_collision(
    self_track: &KinematicTrack,
    other_track: &KinematicTrack,
    horizon: f64,
    step: f64,
    policy: &SafetyPolicy,
) -> Result<CollisionPrediction> {
    let mut own = self_track.clone();
    let mut last = 0.0;
    predict_breach(
        |t| {
            if t > last {
                own = ekf_predict(&own, t - last, policy.process_noise).expect("positive step");
                last = t;
            }
            (own.position(), own.velocity(), own.position_covariance())
        },
        other_track,
        horizon,
        step,
        policy,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    pub position: Vec3,
    pub velocity: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Threat {
    pub track: KinematicTrack,
    pub sphere: EquivalentSphere,
    pub classification: EncounterClassification,
}

/// Brake at `deceleration` for `brake_duration`, then hold `yaw_rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maneuver {
    pub brake_duration: f64,
    pub deceleration: f64,
    pub yaw_rate: f64,
    pub min_separation: f64,
    /// No candidate keeps the spheres apart.
    pub critical: bool,
}

/// Collision status plus the avoidance scheme for both parties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmergencyPacket {
    pub time_to_breach: f64,
    pub sender_yaw_rate: f64,
    pub receiver_yaw_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidancePlan {
    pub maneuver: Maneuver,
    pub packet: Option<EmergencyPacket>,
}

pub fn yaw_candidates(max_yaw_rate: f64) -> Vec<f64> {
    let half = (YAW_CANDIDATES / 2) as f64;
    (0..YAW_CANDIDATES)
        .map(|k| max_yaw_rate * (k as f64 - half) / half)
        .collect()
}

/// Positions every `MANEUVER_DT` of a brake-then-yaw maneuver.
fn maneuver_track(start: &UavState, dynamics: &UavDynamics, yaw_rate: f64, horizon: f64) -> (Vec<Vec3>, Vec3) {
    let steps = (horizon / MANEUVER_DT).ceil() as usize;
    let mut p = start.position;
    let mut v = start.velocity;
    let speed0 = v.norm();
    let dir = if speed0 > 0.0 { v / speed0 } else { Vec3::zeros() };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(p);
    for k in 0..steps {
        let t = k as f64 * MANEUVER_DT;
        let mid = t + 0.5 * MANEUVER_DT;
        let vel = if mid < dynamics.braking_response {
            dir * (speed0 - dynamics.max_accel * mid).max(0.0)
        } else {
            let speed = (speed0 - dynamics.max_accel * dynamics.braking_response).max(0.0);
            let a = yaw_rate * (mid - dynamics.braking_response);
            let (s, c) = a.sin_cos();
            Vec3::new(c * dir.x - s * dir.y, s * dir.x + c * dir.y, dir.z) * speed
        };
        p += vel * MANEUVER_DT;
        v = vel;
        out.push(p);
    }
    (out, v)
}

fn heading_deviation(end: Vec3, velocity: Vec3, goal: Vec3) -> f64 {
    let to_goal = goal - end;
    let (a, b) = (velocity.xy(), to_goal.xy());
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return 0.0;
    }
    (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
}

fn min_gap(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(f64::INFINITY, f64::min)
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Brake, then the yaw rate that maximizes the minimum predicted separation.
/// Ties go to the smaller heading deviation from `goal`, then to the positive
/// rate. A peer UAV receives an emergency packet with its share of a jointly
/// chosen pair of rates.
pub fn plan_avoidance(
    own: &UavState,
    dynamics: &UavDynamics,
    threat: &Threat,
    goal: Vec3,
    horizon: f64,
    prediction: &CollisionPrediction,
) -> Result<AvoidancePlan> {
    let time_to_breach = match prediction {
        CollisionPrediction::Breach { time_to_breach, .. } => *time_to_breach,
        CollisionPrediction::Clear => {
            return Err(ControlError::InvalidInput("avoidance planned without a predicted breach".into()))
        }
    };
    dynamics.validate()?;
    if !(horizon > 0.0) {
        return Err(ControlError::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let candidates = yaw_candidates(dynamics.max_yaw_rate);
    let steps = (horizon / MANEUVER_DT).ceil() as usize;
    let contact = dynamics.physical_radius + threat.sphere.equivalent_radius;

    let own_runs: Vec<(Vec<Vec3>, f64)> = candidates
        .iter()
        .map(|&w| {
            let (path, v) = maneuver_track(own, dynamics, w, horizon);
            let dev = heading_deviation(*path.last().expect("non-empty"), v, goal);
            (path, dev)
        })
        .collect();

    // (separation, deviation, own rate, peer rate)
    let mut best: Option<(f64, f64, f64, Option<f64>)> = None;
    let mut consider = |sep: f64, dev: f64, w: f64, peer: Option<f64>| {
        let better = match best {
            None => true,
            Some((bs, bd, bw, bp)) => {
                if !same(sep, bs) {
                    sep > bs
                } else if !same(dev, bd) {
                    dev < bd
                } else if w != bw {
                    w > bw
                } else {
                    peer.unwrap_or(0.0) > bp.unwrap_or(0.0)
                }
            }
        };
        if better {
            best = Some((sep, dev, w, peer));
        }
    };

    match threat.classification {
        EncounterClassification::Obstacle => {
            let c = threat.track.position();
            let v = threat.track.velocity();
            let other: Vec<Vec3> = (0..=steps).map(|k| c + v * (k as f64 * MANEUVER_DT)).collect();
            for (&w, (path, dev)) in candidates.iter().zip(&own_runs) {
                consider(min_gap(path, &other), *dev, w, None);
            }
        }
        EncounterClassification::PeerUav => {
            let peer_start = UavState { position: threat.track.position(), velocity: threat.track.velocity() };
            let peer_runs: Vec<Vec<Vec3>> = candidates
                .iter()
                .map(|&w| maneuver_track(&peer_start, dynamics, w, horizon).0)
                .collect();
            for (&w, (path, dev)) in candidates.iter().zip(&own_runs) {
                for (&wp, peer_path) in candidates.iter().zip(&peer_runs) {
                    consider(min_gap(path, peer_path), *dev, w, Some(wp));
                }
            }
        }
    }
    let (sep, _, yaw_rate, peer) = best.expect("candidate set is non-empty");
    Ok(AvoidancePlan {
        maneuver: Maneuver {
            brake_duration: dynamics.braking_response,
            deceleration: dynamics.max_accel,
            yaw_rate,
            min_separation: sep,
            critical: sep <= contact,
        },
        packet: peer.map(|receiver_yaw_rate| EmergencyPacket {
            time_to_breach,
            sender_yaw_rate: yaw_rate,
            receiver_yaw_rate,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(r: f64) -> EquivalentSphere {
        EquivalentSphere { center: Vec3::zeros(), equivalent_radius: r }
    }

    fn exact(p: Vec3, v: Vec3) -> KinematicTrack {
        KinematicTrack::isotropic(p, v, 0.0, 0.0, 0.0).unwrap()
    }

    fn policy() -> SafetyPolicy {
        SafetyPolicy {
            self_radius: 1.0,
            other_radius: 1.0,
            response_time: 0.5,
            fixed_error: 2.0,
            error_sigmas: 0.0,
            process_noise: 0.0,
        }
    }

    #[test]
    fn separation_is_the_sum() {
        assert_eq!(min_safe_separation(&sphere(1.0), &sphere(2.0), 0.0, 0.0, 0.0).unwrap(), 3.0);
        assert_eq!(min_safe_separation(&sphere(1.0), &sphere(1.0), 26.0, 0.5, 2.0).unwrap(), 17.0);
        assert!(min_safe_separation(&sphere(1.0), &sphere(1.0), -1.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn head_on_breach_time() {
        let a = exact(Vec3::zeros(), Vec3::new(13.0, 0.0, 0.0));
        let b = exact(Vec3::new(100.0, 0.0, 0.0), Vec3::new(-13.0, 0.0, 0.0));
        let step = 0.01;
        match predict_collision(&a, &b, 10.0, step, &policy()).unwrap() {
            CollisionPrediction::Breach { time_to_breach, min_distance } => {
                assert!((time_to_breach - 83.0 / 26.0).abs() <= step, "{time_to_breach}");
                assert!(min_distance <= 26.0 * step);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn co_moving_far_apart_is_clear() {
        let v = Vec3::new(10.0, 0.0, 0.0);
        let a = exact(Vec3::zeros(), v);
        let b = exact(Vec3::new(0.0, 200.0, 0.0), v);
        assert_eq!(predict_collision(&a, &b, 10.0, 0.1, &policy()).unwrap(), CollisionPrediction::Clear);
    }

    #[test]
    fn breach_time_shrinks_with_gap() {
        let a = exact(Vec3::zeros(), Vec3::new(13.0, 0.0, 0.0));
        let mut prev = f64::INFINITY;
        for gap in [150.0, 120.0, 90.0, 60.0, 30.0] {
            let b = exact(Vec3::new(gap, 0.0, 0.0), Vec3::new(-13.0, 0.0, 0.0));
            let CollisionPrediction::Breach { time_to_breach, .. } =
                predict_collision(&a, &b, 10.0, 0.05, &policy()).unwrap()
            else {
                panic!("expected breach at gap {gap}")
            };
            assert!(time_to_breach <= prev);
            prev = time_to_breach;
        }
    }

    fn breach() -> CollisionPrediction {
        CollisionPrediction::Breach { time_to_breach: 1.0, min_distance: 0.0 }
    }

    fn obstacle_at(p: Vec3, r: f64) -> Threat {
        Threat {
            track: exact(p, Vec3::zeros()),
            sphere: EquivalentSphere { center: p, equivalent_radius: r },
            classification: EncounterClassification::Obstacle,
        }
    }

    #[test]
    fn symmetric_threat_turns_hard_positive() {
        let own = UavState { position: Vec3::zeros(), velocity: Vec3::new(20.0, 0.0, 0.0) };
        let dynamics = UavDynamics::default();
        let threat = obstacle_at(Vec3::new(40.0, 0.0, 0.0), 5.0);
        let plan = plan_avoidance(&own, &dynamics, &threat, Vec3::new(200.0, 0.0, 0.0), 6.0, &breach()).unwrap();
        assert_eq!(plan.maneuver.yaw_rate, dynamics.max_yaw_rate);
        assert!(plan.packet.is_none());
        assert_eq!(plan.maneuver.brake_duration, dynamics.braking_response);
    }

    #[test]
    fn threat_on_the_left_turns_right() {
        let own = UavState { position: Vec3::zeros(), velocity: Vec3::new(20.0, 0.0, 0.0) };
        let dynamics = UavDynamics::default();
        let threat = obstacle_at(Vec3::new(40.0, 8.0, 0.0), 5.0);
        let goal = Vec3::new(200.0, 0.0, 0.0);
        let plan = plan_avoidance(&own, &dynamics, &threat, goal, 6.0, &breach()).unwrap();
        assert!(plan.maneuver.yaw_rate < 0.0);
        // exhaustive oracle
        let other = vec![threat.track.position(); (6.0 / MANEUVER_DT).ceil() as usize + 1];
        let best = yaw_candidates(1.0)
            .into_iter()
            .map(|w| min_gap(&maneuver_track(&own, &dynamics, w, 6.0).0, &other))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(same(plan.maneuver.min_separation, best));
    }

    #[test]
    fn clear_prediction_is_rejected() {
        let own = UavState { position: Vec3::zeros(), velocity: Vec3::new(20.0, 0.0, 0.0) };
        let threat = obstacle_at(Vec3::new(40.0, 0.0, 0.0), 5.0);
        let r = plan_avoidance(&own, &UavDynamics::default(), &threat, Vec3::zeros(), 5.0, &CollisionPrediction::Clear);
        assert!(r.is_err());
    }

    #[test]
    fn unavoidable_is_flagged_critical() {
        let own = UavState { position: Vec3::zeros(), velocity: Vec3::new(20.0, 0.0, 0.0) };
        let threat = obstacle_at(Vec3::new(3.0, 0.0, 0.0), 10.0);
        let plan = plan_avoidance(&own, &UavDynamics::default(), &threat, Vec3::zeros(), 5.0, &breach()).unwrap();
        assert!(plan.maneuver.critical);
    }

    #[test]
    fn head_on_peers_split_to_opposite_sides() {
        let own = UavState { position: Vec3::zeros(), velocity: Vec3::new(20.0, 0.0, 0.0) };
        let dynamics = UavDynamics::default();
        let threat = Threat {
            track: exact(Vec3::new(120.0, 0.0, 0.0), Vec3::new(-20.0, 0.0, 0.0)),
            sphere: EquivalentSphere { center: Vec3::new(120.0, 0.0, 0.0), equivalent_radius: 1.0 },
            classification: EncounterClassification::PeerUav,
        };
        let plan = plan_avoidance(&own, &dynamics, &threat, Vec3::new(300.0, 0.0, 0.0), 5.0, &breach()).unwrap();
        let packet = plan.packet.expect("peer gets a packet");
        assert!(!plan.maneuver.critical);
        // same world-frame sign means each turns to its own side
        assert!(packet.sender_yaw_rate * packet.receiver_yaw_rate > 0.0);
        assert!(packet.sender_yaw_rate > 0.0);
    }
}
