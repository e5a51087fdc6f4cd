use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::mobility::NodeKinematics;
use super::scenario::NetworkScenario;
use super::{NetworkError, Result, Vec3};

/// Disk-model adjacency, boundary inclusive. `sets[i]` is ascending.
pub fn true_neighbor_sets(positions: &[Vec3], comm_range: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    let r2 = comm_range * comm_range;
    let mut sets = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if (positions[i] - positions[j]).norm_squared() <= r2 {
                sets[i].push(j);
                sets[j].push(i);
            }
        }
    }
    for s in sets.iter_mut() {
        s.sort_unstable();
    }
    sets
}

pub(crate) fn adjacency_matrix(positions: &[Vec3], comm_range: f64) -> Vec<Vec<bool>> {
    let n = positions.len();
    let mut adj = vec![vec![false; n]; n];
    for (i, nbrs) in true_neighbor_sets(positions, comm_range).into_iter().enumerate() {
        for j in nbrs {
            adj[i][j] = true;
        }
    }
    adj
}

/// A sensed peer. Carries no network identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensedPeer {
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Peers within the sensing range of `observer`, ordered by true distance,
/// positions perturbed by isotropic Gaussian noise of `noise_std` per axis.
pub fn sense_peers<R: Rng + ?Sized>(
    observer: usize,
    nodes: &[NodeKinematics],
    scenario: &NetworkScenario,
    noise_std: f64,
    rng: &mut R,
) -> Result<Vec<SensedPeer>> {
    if !(noise_std >= 0.0) {
        return Err(NetworkError::InvalidInput(format!("noise std must be non-negative, got {noise_std}")));
    }
    let me = nodes[observer].position;
    let mut in_range: Vec<(f64, &NodeKinematics)> = nodes
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != observer)
        .map(|(_, n)| ((n.position - me).norm(), n))
        .filter(|&(d, _)| d <= scenario.sensing_range)
        .collect();
    in_range.sort_by(|a, b| a.0.total_cmp(&b.0));
    let normal = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).expect("finite std");
    Ok(in_range
        .into_iter()
        .map(|(_, n)| {
            let noise = if noise_std > 0.0 {
                Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
            } else {
                Vec3::zeros()
            };
            SensedPeer {
                position: n.position + noise,
                velocity: n.velocity,
            }
        })
        .collect())
}

fn overlap(reported: &[usize], truth: &[usize]) -> usize {
    reported.iter().filter(|r| truth.contains(r)).count()
}

/// Jaccard index of the reported and true neighbor sets (1 when both are
/// empty). Inputs are treated as sets.
pub fn neighbor_accuracy(reported: &[usize], truth: &[usize]) -> f64 {
    let mut r = reported.to_vec();
    r.sort_unstable();
    r.dedup();
    let mut t = truth.to_vec();
    t.sort_unstable();
    t.dedup();
    let inter = overlap(&r, &t);
    let union = r.len() + t.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Fraction of true neighbors that are reported (1 when there are none).
pub fn neighbor_recall(reported: &[usize], truth: &[usize]) -> f64 {
    let mut t = truth.to_vec();
    t.sort_unstable();
    t.dedup();
    if t.is_empty() {
        return 1.0;
    }
    let mut r = reported.to_vec();
    r.sort_unstable();
    r.dedup();
    overlap(&r, &t) as f64 / t.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundary_inclusive() {
        let p = vec![Vec3::zeros(), Vec3::new(156.0, 0.0, 0.0), Vec3::new(0.0, 156.1, 0.0)];
        let s = true_neighbor_sets(&p, 156.0);
        assert_eq!(s[0], vec![1]);
        assert_eq!(s[1], vec![0]);
        assert!(s[2].is_empty());
    }

    #[test]
    fn matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p: Vec<Vec3> = (0..60)
            .map(|_| Vec3::new(rng.random_range(0.0..600.0), rng.random_range(0.0..600.0), rng.random_range(0.0..300.0)))
            .collect();
        let s = true_neighbor_sets(&p, 156.0);
        for i in 0..60 {
            let want: Vec<usize> = (0..60).filter(|&j| j != i && (p[i] - p[j]).norm() <= 156.0).collect();
            assert_eq!(s[i], want);
        }
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(neighbor_accuracy(&[1, 2, 3], &[3, 2, 1]), 1.0);
        assert!((neighbor_accuracy(&[1, 2], &[2, 3]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(neighbor_accuracy(&[], &[]), 1.0);
        assert_eq!(neighbor_recall(&[1], &[1, 2]), 0.5);
    }

    fn swarm(positions: &[Vec3]) -> Vec<NodeKinematics> {
        positions
            .iter()
            .enumerate()
            .map(|(id, &p)| NodeKinematics { id, position: p, velocity: Vec3::new(1.0, 0.0, 0.0), current_waypoint: p, speed: 1.0 })
            .collect()
    }

    #[test]
    fn sensing_noiseless_and_empty() {
        let sc = NetworkScenario::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nodes = swarm(&[Vec3::zeros(), Vec3::new(100.0, 0.0, 0.0), Vec3::new(500.0, 0.0, 0.0)]);
        let obs = sense_peers(0, &nodes, &sc, 0.0, &mut rng).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].position, Vec3::new(100.0, 0.0, 0.0));
        assert!(sense_peers(2, &nodes, &sc, 0.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn sensing_noise_std() {
        let sc = NetworkScenario::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let nodes = swarm(&[Vec3::zeros(), Vec3::new(50.0, 0.0, 0.0)]);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| sense_peers(0, &nodes, &sc, 1.0, &mut rng).unwrap()[0].position.x - 50.0)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let std = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        assert!((std - 1.0).abs() < 0.05, "{std}");
    }
}
