//! Swarm networking: random-waypoint mobility, neighbor discovery protocols
//! and routing convergence after topology changes.
//!
//! The sensing-triggered protocol tracks peers by (identity-free) sensing and
//! only exchanges a beacon when a sensed track crosses the communication
//! boundary; the baselines learn neighbors from periodic beacons, hellos or
//! route-request floods.

mod discovery;
mod experiment;
mod mobility;
mod protocol;
mod routing;
mod scenario;
mod topology;
mod update_time;

pub use discovery::{run_discovery, DiscoveryRun, EntrySource, NeighborEntry, NeighborTable};
pub use experiment::{
    run_network_experiment, summarize_network, NetRecord, NetSummary, NetworkSettings,
};
pub use mobility::{initial_swarm, step_random_waypoint, NodeKinematics};
pub use protocol::{ProtocolConfig, ProtocolKind};
pub use routing::{recompute_routes, routes_from_adjacency, Route, RoutingTable};
pub use scenario::NetworkScenario;
pub use topology::{
    neighbor_accuracy, neighbor_recall, sense_peers, true_neighbor_sets, SensedPeer,
};
pub use update_time::{
    affected_nodes, find_topology_event, measure_routing_update_time, EventKind, TopologyEvent,
    UpdateOutcome,
};

pub use crate::Vec3;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, NetworkError>;
