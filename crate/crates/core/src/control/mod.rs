//! Target classification, collision prediction and avoidance, and path
//! planning for a single UAV among dynamic obstacles and peers.

mod avoidance;
mod classify;
mod dynamics;
mod ekf;
mod energy;
mod experiment;
mod planner;

pub use avoidance::{
    min_safe_separation, plan_avoidance, predict_collision, yaw_candidates, AvoidancePlan, CollisionPrediction,
    EmergencyPacket, Maneuver, SafetyPolicy, Threat, UavState, YAW_CANDIDATES,
};
pub use classify::{classify_detection, EncounterClassification};
pub use dynamics::{inflation, EquivalentSphere, UavDynamics, INFLATION_SIGMAS};
pub use ekf::{ekf_predict, ekf_update, fuse_shared_measurements, process_noise, transition, KinematicTrack};
pub use energy::{path_energy, PowerModel, SpeedProfile};
pub use experiment::{
    collision_probability, control_records, crossing_encounter, fly, run_control_experiment,
    run_control_experiment_detailed, wilson_interval, AcceptedPlan, AvoidancePolicy, CollisionEstimate,
    ControlRecord, ControlSettings, Encounter, FlightOutcome, Planner, ReplanEvent, TrialDetail,
};
pub use planner::{
    polyline_length, replan_with_reuse, rrt_star, Environment3d, Obstacle, PlanOutcome, PlanTree, ReplanOutcome,
    RrtSettings, TreeNode,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("innovation covariance is numerically singular")]
    DegenerateUpdate,
    #[error("unreachable: {0}")]
    Unreachable(String),
}

pub type Result<T> = std::result::Result<T, ControlError>;
