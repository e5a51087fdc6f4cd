use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::seeds::SeedBuilder;

use super::scenario::NetworkScenario;
use super::{NetworkError, Result, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeKinematics {
    pub id: usize,
    pub position: Vec3,
    /// Velocity of the current leg (zero while paused at a waypoint).
    pub velocity: Vec3,
    pub current_waypoint: Vec3,
    pub speed: f64,
}

fn uniform_point<R: Rng + ?Sized>(arena: &Vec3, rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.random_range(0.0..=arena.x),
        rng.random_range(0.0..=arena.y),
        rng.random_range(0.0..=arena.z),
    )
}

fn draw_speed<R: Rng + ?Sized>(scenario: &NetworkScenario, rng: &mut R) -> f64 {
    if scenario.speed_max > scenario.speed_min {
        rng.random_range(scenario.speed_min..=scenario.speed_max)
    } else {
        scenario.speed_min
    }
}

fn leg_velocity(from: &Vec3, to: &Vec3, speed: f64) -> Vec3 {
    let d = to - from;
    let n = d.norm();
    if n > 0.0 {
        d * (speed / n)
    } else {
        Vec3::zeros()
    }
}

fn initial_node<R: Rng + ?Sized>(id: usize, scenario: &NetworkScenario, rng: &mut R) -> NodeKinematics {
    let position = uniform_point(&scenario.arena, rng);
    let current_waypoint = uniform_point(&scenario.arena, rng);
    let speed = draw_speed(scenario, rng);
    NodeKinematics {
        id,
        velocity: leg_velocity(&position, &current_waypoint, speed),
        position,
        current_waypoint,
        speed,
    }
}

fn step_node<R: Rng + ?Sized>(node: &mut NodeKinematics, scenario: &NetworkScenario, dt: f64, rng: &mut R) {
    let to_go = node.current_waypoint - node.position;
    let dist = to_go.norm();
    let travel = node.speed * dt;
    if dist > travel {
        node.position += to_go * (travel / dist);
    } else {
        node.position = node.current_waypoint;
        node.current_waypoint = uniform_point(&scenario.arena, rng);
        node.speed = draw_speed(scenario, rng);
    }
    node.velocity = leg_velocity(&node.position, &node.current_waypoint, node.speed);
}

/// Uniform initial positions, waypoints and speeds.
pub fn initial_swarm<R: Rng + ?Sized>(scenario: &NetworkScenario, rng: &mut R) -> Vec<NodeKinematics> {
    (0..scenario.node_count).map(|id| initial_node(id, scenario, rng)).collect()
}

/// Advances every node by `dt` toward its waypoint. A node that reaches its
/// waypoint stops there for the rest of the tick and draws a new waypoint and
/// speed for the next leg.
pub fn step_random_waypoint<R: Rng + ?Sized>(
    nodes: &mut [NodeKinematics],
    scenario: &NetworkScenario,
    dt: f64,
    rng: &mut R,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(NetworkError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    for node in nodes.iter_mut() {
        step_node(node, scenario, dt, rng);
    }
    Ok(())
}

/// Random waypoint with one random stream per node id, so a node's
/// trajectory is the same whatever the swarm size.
pub(crate) struct SwarmMobility {
    streams: Vec<ChaCha8Rng>,
}

impl SwarmMobility {
    pub fn new(seed: u64, scenario: &NetworkScenario) -> (Self, Vec<NodeKinematics>) {
        let mut streams: Vec<ChaCha8Rng> = (0..scenario.node_count)
            .map(|id| SeedBuilder::new(seed, "net/mobility").int(id as u64).rng())
            .collect();
        let nodes = streams
            .iter_mut()
            .enumerate()
            .map(|(id, rng)| initial_node(id, scenario, rng))
            .collect();
        (Self { streams }, nodes)
    }

    pub fn step(&mut self, nodes: &mut [NodeKinematics], scenario: &NetworkScenario, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(NetworkError::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        for (node, rng) in nodes.iter_mut().zip(self.streams.iter_mut()) {
            step_node(node, scenario, dt, rng);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn arrival_draws_new_waypoint() {
        let sc = NetworkScenario::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Vec3::new(10.0, 10.0, 10.0);
        let mut nodes = vec![NodeKinematics { id: 0, position: p, velocity: Vec3::zeros(), current_waypoint: p, speed: 7.0 }];
        step_random_waypoint(&mut nodes, &sc, 0.01, &mut rng).unwrap();
        assert_eq!(nodes[0].position, p);
        assert_ne!(nodes[0].current_waypoint, p);
        assert!((nodes[0].velocity.norm() - nodes[0].speed).abs() < 1e-9);
    }

    #[test]
    fn per_node_streams_nest_across_sizes() {
        let small = NetworkScenario { node_count: 5, ..Default::default() };
        let large = NetworkScenario { node_count: 9, ..Default::default() };
        let (mut ma, mut a) = SwarmMobility::new(4, &small);
        let (mut mb, mut b) = SwarmMobility::new(4, &large);
        for _ in 0..500 {
            ma.step(&mut a, &small, 0.01).unwrap();
            mb.step(&mut b, &large, 0.01).unwrap();
        }
        assert_eq!(a[..], b[..5]);
    }

    #[test]
    fn speeds_within_range_and_positions_inside() {
        let sc = NetworkScenario { node_count: 10_000, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut nodes = initial_swarm(&sc, &mut rng);
        for _ in 0..20 {
            step_random_waypoint(&mut nodes, &sc, 0.5, &mut rng).unwrap();
        }
        let (lo, hi) = nodes.iter().fold((f64::MAX, f64::MIN), |(a, b), n| (a.min(n.speed), b.max(n.speed)));
        assert!(lo >= 5.0 && hi <= 10.0);
        assert!(lo < 5.01 && hi > 9.99);
        for n in &nodes {
            for k in 0..3 {
                assert!(n.position[k] >= 0.0 && n.position[k] <= sc.arena[k]);
            }
        }
    }

    #[test]
    fn zero_dt_rejected() {
        let sc = NetworkScenario::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut nodes = initial_swarm(&sc, &mut rng);
        assert!(step_random_waypoint(&mut nodes, &sc, 0.0, &mut rng).is_err());
    }
}
