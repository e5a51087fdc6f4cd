//! Simulation kernels for integrated sensing, communication and control in
//! UAV swarms.
//!
//! The crate is split into three experiment families plus the plumbing that
//! drives them:
//!
//! - [`sensing`]: OFDM echo synthesis over fragmented spectrum, all-pole
//!   blank-band recovery, FFT / OMP baselines, detection and the CRLB.
//! - [`network`]: random-waypoint swarm mobility, neighbor discovery protocols
//!   (including the sensing-triggered handshake) and routing convergence.
//! - [`control`]: EKF tracking, measurement fusion, collision prediction and
//!   avoidance, RRT* planning with tree-reuse replanning, propulsion energy.
//! - [`runner`]: configuration parsing, seed derivation, CSV records and the
//!   run manifest used by the `iscc-sim` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod network;
pub mod runner;
pub mod seeds;
pub mod sensing;
pub mod stats;

pub use control::ControlError;
pub use network::NetworkError;
pub use runner::ConfigError;
pub use sensing::SensingError;

/// Cartesian vector in metres (or metres per second).
pub type Vec3 = nalgebra::Vector3<f64>;

/// Complex sample type used throughout the sensing chain.
pub type C64 = num_complex::Complex64;
