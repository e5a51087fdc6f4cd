use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::avoidance::{predict_breach, SafetyPolicy};
use super::dynamics::{inflation, EquivalentSphere, UavDynamics};
use super::ekf::{ekf_predict, ekf_update, KinematicTrack};
use super::energy::PowerModel;
use super::planner::{replan_with_reuse, rrt_star, Environment3d, Obstacle, PlanOutcome, PlanTree, RrtSettings};
use super::{ControlError, Result};
use crate::seeds::SeedBuilder;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSettings {
    pub bounds: Vec3,
    pub obstacle_radii: Vec<f64>,
    pub obstacle_speed: f64,
    pub dynamics: UavDynamics,
    pub cruise_speed: f64,
    pub sensing_std: f64,
    /// Center distance at which the obstacle is observed.
    pub sensing_range: f64,
    pub iterations: usize,
    pub replan_iterations: usize,
    pub step: f64,
    pub goal_radius: f64,
    pub goal_bias: f64,
    pub tick: f64,
    pub horizon: f64,
    pub prediction_step: f64,
    pub process_noise: f64,
    /// Error sigmas folded into the safe separation.
    pub error_sigmas: f64,
    pub fixed_error: f64,
    /// Track is acted on once its velocity standard deviation drops below this, m/s.
    pub confirm_velocity_std: f64,
    pub start: Vec3,
    pub goal: Vec3,
    pub max_flight_time: f64,
    pub trials: usize,
    pub seed: u64,
    /// Run trials one at a time so wall-clock delays are not disturbed.
    pub timing_exclusive: bool,
    pub power: PowerModel,
}

impl Default for ControlSettings {
    fn default() -> Self {
        Self {
            bounds: Vec3::new(300.0, 300.0, 100.0),
            obstacle_radii: vec![20.0, 30.0, 40.0, 50.0, 60.0],
            obstacle_speed: 5.0,
            dynamics: UavDynamics::default(),
            cruise_speed: 10.0,
            sensing_std: 1.0,
            sensing_range: 250.0,
            iterations: 1000,
            replan_iterations: 1000,
            step: 5.0,
            goal_radius: 5.0,
            goal_bias: 0.1,
            tick: 0.05,
            horizon: 10.0,
            prediction_step: 0.1,
            process_noise: 0.05,
            error_sigmas: 3.0,
            fixed_error: 1.0,
            confirm_velocity_std: 1.0,
            start: Vec3::new(30.0, 150.0, 50.0),
            goal: Vec3::new(270.0, 150.0, 50.0),
            max_flight_time: 150.0,
            trials: 50,
            seed: 1,
            timing_exclusive: true,
            power: PowerModel::default(),
        }
    }
}

impl ControlSettings {
    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate()?;
        let positive = [
            ("obstacle_speed", self.obstacle_speed),
            ("cruise_speed", self.cruise_speed),
            ("sensing_range", self.sensing_range),
            ("step", self.step),
            ("goal_radius", self.goal_radius),
            ("tick", self.tick),
            ("horizon", self.horizon),
            ("prediction_step", self.prediction_step),
            ("max_flight_time", self.max_flight_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ControlError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.sensing_std >= 0.0) || self.trials == 0 || self.obstacle_radii.iter().any(|r| !(*r > 0.0)) {
            return Err(ControlError::InvalidInput("need sensing_std >= 0, trials >= 1, radii > 0".into()));
        }
        if self.cruise_speed > self.dynamics.max_speed {
            return Err(ControlError::InvalidInput(format!(
                "cruise speed {} exceeds max speed {}",
                self.cruise_speed, self.dynamics.max_speed
            )));
        }
        Environment3d::empty(self.bounds)?;
        Ok(())
    }

    fn rrt(&self, iterations: usize) -> RrtSettings {
        RrtSettings {
            iterations,
            step_length: self.step,
            goal_radius: self.goal_radius,
            goal_bias: self.goal_bias,
            speed: self.cruise_speed,
        }
    }

    fn policy(&self, obstacle_radius: f64) -> SafetyPolicy {
        SafetyPolicy {
            self_radius: self.dynamics.physical_radius,
            other_radius: obstacle_radius + inflation(self.sensing_std),
            response_time: self.dynamics.braking_response,
            fixed_error: self.fixed_error,
            error_sigmas: self.error_sigmas,
            process_noise: self.process_noise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planner {
    Reuse,
    Scratch,
}

impl Planner {
    pub fn name(&self) -> &'static str {
        match self {
            Planner::Reuse => "reuse",
            Planner::Scratch => "rrt-star",
        }
    }
}

/// A dynamic obstacle timed to cross the nominal path as the UAV gets there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Encounter {
    pub radius: f64,
    pub start_center: Vec3,
    pub velocity: Vec3,
}

impl Encounter {
    pub fn center_at(&self, t: f64) -> Vec3 {
        self.start_center + self.velocity * t
    }
}

/// Obstacle crossing `path` at a fraction `along` of its length, moving at
/// `heading` radians from the path normal.
pub fn crossing_encounter(path: &[Vec3], radius: f64, speed: f64, cruise: f64, along: f64, heading: f64, side: f64) -> Encounter {
    let cursor = PathCursor::new(path.to_vec());
    let s = along * cursor.length();
    let (p, dir) = cursor.at(s);
    let normal = Vec3::new(-dir.y, dir.x, 0.0).normalize() * side.signum();
    let (sn, cs) = heading.sin_cos();
    let flat = Vec3::new(dir.x, dir.y, 0.0).normalize();
    let v = (normal * cs + flat * sn) * speed;
    let t = s / cruise;
    Encounter { radius, start_center: p - v * t, velocity: v }
}

struct PathCursor {
    points: Vec<Vec3>,
    cumulative: Vec<f64>,
}

impl PathCursor {
    fn new(points: Vec<Vec3>) -> Self {
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let last = *cumulative.last().expect("non-empty");
            cumulative.push(last + (w[1] - w[0]).norm());
        }
        Self { points, cumulative }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    /// Position and unit direction at arc length `s` (clamped to the ends).
    fn at(&self, s: f64) -> (Vec3, Vec3) {
        let n = self.points.len();
        if n < 2 {
            return (self.points[0], Vec3::zeros());
        }
        let s = s.clamp(0.0, self.length());
        let k = match self.cumulative.partition_point(|&c| c <= s) {
            0 => 0,
            i => (i - 1).min(n - 2),
        };
        let seg = self.points[k + 1] - self.points[k];
        let len = seg.norm();
        if len == 0.0 {
            return (self.points[k], Vec3::zeros());
        }
        let dir = seg / len;
        (self.points[k] + dir * (s - self.cumulative[k]), dir)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanEvent {
    pub time: f64,
    pub delay_s: f64,
    pub expansions: usize,
    pub success: bool,
    /// The stopped UAV was still inside the inflated obstacle, so it held
    /// position instead of planning.
    pub blocked: bool,
}

/// A path the UAV committed to, with the environment it was planned in.
/// The path is flown from environment time zero at `speed`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedPlan {
    pub env: Environment3d,
    pub path: Vec<Vec3>,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightOutcome {
    pub collided: bool,
    pub reached_goal: bool,
    pub flight_time: f64,
    pub path_length: f64,
    pub energy: f64,
    /// Smallest true surface gap to the obstacle, m.
    pub min_clearance: f64,
    pub replans: Vec<ReplanEvent>,
    pub accepted: Vec<AcceptedPlan>,
}

enum Mode {
    Cruise { path: PathCursor, s: f64 },
    Braking { dir: Vec3, speed: f64 },
}

/// One start-to-goal flight against an encounter, ticked at `settings.tick`.
pub fn fly(
    settings: &ControlSettings,
    initial: &PlanTree,
    encounter: Option<&Encounter>,
    planner: Planner,
    avoidance: bool,
    seed: u64,
) -> Result<FlightOutcome> {
    if !initial.found() {
        return Err(ControlError::InvalidInput("initial plan has no goal path".into()));
    }
    let dt = settings.tick;
    let mut noise = SeedBuilder::new(seed, "control/sensing").rng();
    let meas_cov = Matrix3::identity() * settings.sensing_std.powi(2).max(1e-12);
    let dyn_ = &settings.dynamics;
    let path0 = initial.path();
    let mut out = FlightOutcome {
        collided: false,
        reached_goal: false,
        flight_time: 0.0,
        path_length: 0.0,
        energy: 0.0,
        min_clearance: f64::INFINITY,
        replans: Vec::new(),
        accepted: vec![AcceptedPlan {
            env: Environment3d::empty(settings.bounds)?,
            path: path0.clone(),
            speed: settings.cruise_speed,
        }],
    };
    let mut tree = initial.clone();
    let mut mode = Mode::Cruise { path: PathCursor::new(path0), s: 0.0 };
    let mut pos = settings.start;
    let mut track: Option<KinematicTrack> = None;
    let policy = encounter.map(|e| settings.policy(e.radius));
    let steps = (settings.max_flight_time / dt).ceil() as usize;

    for k in 0..steps {
        let t = k as f64 * dt;
        if let Some(e) = encounter {
            let gap = (pos - e.center_at(t)).norm() - e.radius - dyn_.physical_radius;
            out.min_clearance = out.min_clearance.min(gap);
            if gap < 0.0 {
                out.collided = true;
                out.flight_time = t;
                return Ok(out);
            }
            let c = e.center_at(t);
            if avoidance && (pos - c).norm() <= settings.sensing_range {
                let z = c + Vec3::from_fn(|_, _| { let g: f64 = StandardNormal.sample(&mut noise); settings.sensing_std * g });
                track = Some(match track.take() {
                    None => KinematicTrack::isotropic(z, Vec3::zeros(), settings.sensing_std.max(1e-6), 2.0 * dyn_.max_speed, t)?,
                    Some(tr) => ekf_update(&ekf_predict(&tr, t - tr.last_update, settings.process_noise)?, z, &meas_cov)?,
                });
            }
        }

        // decide
        if let (Mode::Cruise { path, s }, Some(tr), Some(pol)) = (&mode, &track, &policy) {
            let confirmed = tr.velocity_covariance().diagonal().max().sqrt() < settings.confirm_velocity_std;
            if confirmed {
                let now = if t > tr.last_update { ekf_predict(tr, t - tr.last_update, settings.process_noise)? } else { tr.clone() };
                let s0 = *s;
                let v = settings.cruise_speed;
                let own = |tau: f64| {
                    let s = s0 + v * tau;
                    let (p, d) = path.at(s);
                    let vel = if s < path.length() { d * v } else { Vec3::zeros() };
                    (p, vel, Matrix3::zeros())
                };
                let pred = predict_breach(own, &now, settings.horizon, settings.prediction_step, pol)?;
                if pred.is_breach() {
                    let (_, d) = path.at(s0);
                    mode = Mode::Braking { dir: d, speed: settings.cruise_speed };
                }
            }
        }

        // replan once stopped
        if let Mode::Braking { speed, .. } = mode {
            if speed <= 0.0 {
                let tr = track.as_ref().expect("braking follows a confirmed track");
                let tr = if t > tr.last_update { ekf_predict(tr, t - tr.last_update, settings.process_noise)? } else { tr.clone() };
                let pol = policy.expect("encounter present");
                let env = replanning_env(settings, &tr, &pol)?;
                let rrt = settings.rrt(settings.replan_iterations);
                let key = SeedBuilder::new(seed, "control/replan").int(out.replans.len() as u64).finish();
                if env.point_free(pos, 0.0) {
                    let (new_tree, delay, expansions) = match planner {
                        Planner::Reuse => {
                            let r = replan_with_reuse(&tree, &env, pos, settings.goal, &rrt, key)?;
                            (r.tree, r.replanning_delay, r.expansions)
                        }
                        Planner::Scratch => {
                            let r = rrt_star(&env, pos, settings.goal, &rrt, key)?;
                            (r.tree, r.elapsed.as_secs_f64(), r.expansions)
                        }
                    };
                    let success = new_tree.found();
                    out.replans.push(ReplanEvent { time: t, delay_s: delay, expansions, success, blocked: false });
                    if success {
                        let path = new_tree.path();
                        out.accepted.push(AcceptedPlan { env, path: path.clone(), speed: settings.cruise_speed });
                        tree = new_tree;
                        mode = Mode::Cruise { path: PathCursor::new(path), s: 0.0 };
                    }
                } else {
                    out.replans.push(ReplanEvent { time: t, delay_s: 0.0, expansions: 0, success: false, blocked: true });
                }
            }
        }

        // move
        let before = pos;
        let speed = match &mut mode {
            Mode::Cruise { path, s } => {
                *s += settings.cruise_speed * dt;
                pos = path.at(*s).0;
                if *s >= path.length() {
                    out.reached_goal = true;
                }
                settings.cruise_speed
            }
            Mode::Braking { dir, speed } => {
                let next = (*speed - dyn_.max_accel * dt).max(0.0);
                pos += *dir * (0.5 * (*speed + next) * dt);
                *speed = next;
                0.5 * (*speed + next)
            }
        };
        out.path_length += (pos - before).norm();
        out.energy += settings.power.power(speed) * dt;
        out.flight_time = t + dt;
        if out.reached_goal {
            break;
        }
    }
    Ok(out)
}

/// Environment seen by the replanner: the tracked obstacle with its
/// equivalent radius, and a clearance that covers the safe-separation terms
/// over the prediction horizon.
fn replanning_env(settings: &ControlSettings, track: &KinematicTrack, policy: &SafetyPolicy) -> Result<Environment3d> {
    let far = ekf_predict(track, settings.horizon, settings.process_noise)?;
    let closing = settings.cruise_speed + track.velocity().norm();
    let error = policy.fixed_error + policy.error_sigmas * far.position_covariance().trace().sqrt();
    let clearance = policy.self_radius + closing * policy.response_time + error + 1.0;
    Ok(Environment3d {
        bounds: settings.bounds,
        obstacles: vec![Obstacle {
            sphere: EquivalentSphere { center: track.position(), equivalent_radius: policy.other_radius },
            velocity: track.velocity(),
        }],
        clearance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlRecord {
    pub planner: String,
    pub obstacle_radius_m: f64,
    pub trial: usize,
    /// First planning episode; NaN when none happened.
    pub replanning_delay_ms: f64,
    pub expansions: usize,
    pub path_length_m: f64,
    pub energy_j: f64,
    pub collided: bool,
    pub reached_goal: bool,
    pub replans: usize,
}

fn encounter_for(settings: &ControlSettings, path: &[Vec3], radius: f64, rng: &mut ChaCha8Rng) -> Encounter {
    let along = rng.random_range(0.45..0.65);
    let heading = rng.random_range(-30.0_f64..30.0).to_radians();
    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    crossing_encounter(path, radius, settings.obstacle_speed, settings.cruise_speed, along, heading, side)
}

/// Everything produced by one (radius, trial) cell.
#[derive(Debug, Clone)]
pub struct TrialDetail {
    pub radius: f64,
    pub trial: usize,
    pub encounter: Encounter,
    pub flights: Vec<(Planner, FlightOutcome)>,
}

fn initial_plan(settings: &ControlSettings, key: u64) -> Result<PlanOutcome> {
    let env = Environment3d::empty(settings.bounds)?;
    let plan = rrt_star(&env, settings.start, settings.goal, &settings.rrt(settings.iterations), key)?;
    if !plan.tree.found() {
        return Err(ControlError::Unreachable("initial plan did not reach the goal".into()));
    }
    Ok(plan)
}

fn run_cell(settings: &ControlSettings, radius: f64, trial: usize) -> Result<TrialDetail> {
    let base = SeedBuilder::new(settings.seed, "control/trial").float(radius).int(trial as u64);
    let plan = initial_plan(settings, base.clone().label("plan").finish())?;
    let encounter = encounter_for(settings, &plan.tree.path(), radius, &mut base.clone().label("encounter").rng());
    let fkey = base.label("flight").finish();
    let flights = [Planner::Reuse, Planner::Scratch]
        .into_iter()
        .map(|p| fly(settings, &plan.tree, Some(&encounter), p, true, fkey).map(|f| (p, f)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialDetail { radius, trial, encounter, flights })
}

/// Radius by trial sweep with both planners; flights of one trial share the
/// initial plan, encounter and sensing noise.
pub fn run_control_experiment_detailed(settings: &ControlSettings) -> Result<Vec<TrialDetail>> {
    settings.validate()?;
    let cells: Vec<(f64, usize)> = settings
        .obstacle_radii
        .iter()
        .flat_map(|&r| (0..settings.trials).map(move |t| (r, t)))
        .collect();
    if settings.timing_exclusive {
        cells.iter().map(|&(r, t)| run_cell(settings, r, t)).collect()
    } else {
        cells.par_iter().map(|&(r, t)| run_cell(settings, r, t)).collect()
    }
}

pub fn control_records(details: &[TrialDetail]) -> Vec<ControlRecord> {
    details
        .iter()
        .flat_map(|d| {
            d.flights.iter().map(move |(p, f)| {
                let first = f.replans.iter().find(|e| !e.blocked);
                ControlRecord {
                    planner: p.name().to_string(),
                    obstacle_radius_m: d.radius,
                    trial: d.trial,
                    replanning_delay_ms: first.map_or(f64::NAN, |e| e.delay_s * 1e3),
                    expansions: first.map_or(0, |e| e.expansions),
                    path_length_m: f.path_length,
                    energy_j: f.energy,
                    collided: f.collided,
                    reached_goal: f.reached_goal,
                    replans: f.replans.iter().filter(|e| !e.blocked).count(),
                }
            })
        })
        .collect()
}

pub fn run_control_experiment(settings: &ControlSettings) -> Result<Vec<ControlRecord>> {
    Ok(control_records(&run_control_experiment_detailed(settings)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvoidancePolicy {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEstimate {
    pub collisions: usize,
    pub trials: usize,
    pub probability: f64,
    /// 95 % Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = 1.959_963_984_540_054_f64;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Monte Carlo collision rate over full flights. Each trial draws a fresh
/// initial plan, crossing geometry and sensing noise; `radius` of `None`
/// flies without obstacles. With avoidance off the UAV flies its initial
/// path blind.
pub fn collision_probability(
    policy: AvoidancePolicy,
    settings: &ControlSettings,
    radius: Option<f64>,
    trials: usize,
    seed: u64,
) -> Result<CollisionEstimate> {
    settings.validate()?;
    if trials == 0 {
        return Err(ControlError::InvalidInput("need at least one trial".into()));
    }
    let hits: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let base = SeedBuilder::new(seed, "control/mc").int(trial as u64);
            let plan = initial_plan(settings, base.clone().label("plan").finish())?;
            let encounter = radius.map(|r| encounter_for(settings, &plan.tree.path(), r, &mut base.clone().label("encounter").rng()));
            let f = fly(settings, &plan.tree, encounter.as_ref(), Planner::Reuse, policy == AvoidancePolicy::On, base.label("flight").finish())?;
            Ok(f.collided)
        })
        .collect::<Result<_>>()?;
    let collisions = hits.iter().filter(|&&h| h).count();
    let (ci_low, ci_high) = wilson_interval(collisions, trials);
    Ok(CollisionEstimate {
        collisions,
        trials,
        probability: collisions as f64 / trials as f64,
        ci_low,
        ci_high,
    })
}
