//! Routing update time after an injected link break or formation.
//!
//! Each protocol contributes a detection delay (how long until an endpoint
//! notices the change) and then the endpoints' link-state update floods
//! through the post-event graph. Transmissions are serialized by carrier
//! sense: a node waits until neither it nor any neighbor is on air, counting
//! background beacons of periodic protocols.

use std::collections::BinaryHeap;
use std::cmp::Reverse;

use rand::Rng;

use super::mobility::NodeKinematics;
use super::protocol::{ProtocolConfig, ProtocolKind};
use super::routing::routes_from_adjacency;
use super::scenario::NetworkScenario;
use super::topology::adjacency_matrix;
use super::{NetworkError, Result, Vec3};
use crate::seeds::SeedBuilder;

/// Distance band around the communication range in which endpoint pairs are
/// eligible for injection.
const EVENT_BAND_M: f64 = 15.0;
/// Distance from the boundary after the injected move.
const EVENT_MARGIN_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    LinkBreak,
    LinkFormation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyEvent {
    pub kind: EventKind,
    pub time: f64,
    /// Endpoint that stays in place.
    pub anchor: usize,
    /// Endpoint displaced across the boundary.
    pub moved: usize,
    pub before: Vec<NodeKinematics>,
    pub after: Vec<NodeKinematics>,
}

impl TopologyEvent {
    pub fn adjacency_before(&self, comm_range: f64) -> Vec<Vec<bool>> {
        adjacency_matrix(&positions(&self.before), comm_range)
    }

    pub fn adjacency_after(&self, comm_range: f64) -> Vec<Vec<bool>> {
        adjacency_matrix(&positions(&self.after), comm_range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateOutcome {
    Converged { seconds: f64 },
    /// Some affected node cannot be reached in the post-event graph.
    Censored,
}

impl UpdateOutcome {
    pub fn seconds(&self) -> Option<f64> {
        match *self {
            UpdateOutcome::Converged { seconds } => Some(seconds),
            UpdateOutcome::Censored => None,
        }
    }
}

fn positions(nodes: &[NodeKinematics]) -> Vec<Vec3> {
    nodes.iter().map(|n| n.position).collect()
}

/// Nodes whose minimum-hop routing table differs between the two graphs.
pub fn affected_nodes(before: &[Vec<bool>], after: &[Vec<bool>]) -> Vec<usize> {
    let a = routes_from_adjacency(before);
    let b = routes_from_adjacency(after);
    (0..a.len()).filter(|&i| a[i] != b[i]).collect()
}

/// Picks a pair near the boundary and moves one endpoint just across it so
/// that exactly one link toggles. Returns `None` if no pair qualifies.
///
/// Candidates are tried in order of their larger id, then a random key, so
/// swarms that share their low-id nodes share events.
pub fn find_topology_event<R: Rng + ?Sized>(
    nodes: &[NodeKinematics],
    scenario: &NetworkScenario,
    kind: EventKind,
    time: f64,
    rng: &mut R,
) -> Option<TopologyEvent> {
    let r = scenario.comm_range;
    let pos = positions(nodes);
    let adj = adjacency_matrix(&pos, r);
    let n = nodes.len();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let d = (pos[u] - pos[v]).norm();
            let eligible = match kind {
                EventKind::LinkBreak => adj[u][v] && r - d < EVENT_BAND_M,
                EventKind::LinkFormation => !adj[u][v] && d - r < EVENT_BAND_M,
            };
            if eligible && d > 0.0 {
                pairs.push((u, v));
            }
        }
    }
    // lower ids first so nested swarms pick the same pair
    let key: u64 = rng.random();
    pairs.sort_by_cached_key(|&(u, v)| (u.max(v), SeedBuilder::new(key, "pair").int(u as u64).int(v as u64).finish()));
    let target = match kind {
        EventKind::LinkBreak => r + EVENT_MARGIN_M,
        EventKind::LinkFormation => r - EVENT_MARGIN_M,
    };
    for (u, v) in pairs {
        let dir = (pos[v] - pos[u]).normalize();
        let moved = pos[u] + dir * target;
        let inside = (0..3).all(|k| moved[k] >= 0.0 && moved[k] <= scenario.arena[k]);
        if !inside {
            continue;
        }
        let mut after_pos = pos.clone();
        after_pos[v] = moved;
        let after_adj = adjacency_matrix(&after_pos, r);
        let others_kept = (0..n).all(|w| w == u || adj[v][w] == after_adj[v][w]);
        if !others_kept || affected_nodes(&adj, &after_adj).is_empty() {
            continue;
        }
        let mut after = nodes.to_vec();
        after[v].position = moved;
        return Some(TopologyEvent {
            kind,
            time,
            anchor: u,
            moved: v,
            before: nodes.to_vec(),
            after,
        });
    }
    None
}

/// Periodic on-air schedule `phase + k * period` of one node.
#[derive(Debug, Clone, Copy)]
struct Schedule {
    phase: f64,
    period: f64,
}

struct Channel<'a> {
    adj: &'a [Vec<bool>],
    airtime: f64,
    background: Vec<Option<Schedule>>,
    busy: Vec<Vec<(f64, f64)>>,
}

impl Channel<'_> {
    /// Earliest end of an interval covering `t` at node `y`, if any.
    fn blocked_until(&self, y: usize, t: f64) -> Option<f64> {
        let mut until: Option<f64> = None;
        if let Some(s) = self.background[y] {
            let k = ((t - s.phase) / s.period).floor();
            let start = s.phase + k * s.period;
            let end = start + self.airtime;
            if end > t {
                until = Some(end);
            }
        }
        for &(s, e) in &self.busy[y] {
            if s <= t && t < e {
                until = Some(until.map_or(e, |u: f64| u.max(e)));
            }
        }
        until
    }

    /// Earliest start `>= ready` at which `x` and its neighbors are silent.
    fn slot(&self, x: usize, ready: f64) -> f64 {
        let mut t = ready;
        'search: loop {
            for y in 0..self.adj.len() {
                if y == x || self.adj[x][y] {
                    if let Some(u) = self.blocked_until(y, t) {
                        t = u;
                        continue 'search;
                    }
                }
            }
            return t;
        }
    }

    fn transmit(&mut self, x: usize, ready: f64) -> f64 {
        let s = self.slot(x, ready);
        let e = s + self.airtime;
        for y in 0..self.adj.len() {
            if y == x || self.adj[x][y] {
                self.busy[y].push((s, e));
            }
        }
        s
    }
}

/// Floods one update per origin; returns the first time each node holds an
/// update (`INFINITY` if never reached).
fn flood(channel: &mut Channel, origins: &[(usize, f64)]) -> Vec<f64> {
    let n = channel.adj.len();
    let mut arrival = vec![f64::INFINITY; n];
    let mut sent = vec![vec![false; n]; origins.len()];
    let mut heap: BinaryHeap<Reverse<(OrdF64, usize, usize)>> = BinaryHeap::new();
    for (f, &(x, t)) in origins.iter().enumerate() {
        arrival[x] = arrival[x].min(t);
        heap.push(Reverse((OrdF64(t), f, x)));
    }
    while let Some(Reverse((OrdF64(ready), f, x))) = heap.pop() {
        if sent[f][x] {
            continue;
        }
        sent[f][x] = true;
        let s = channel.transmit(x, ready);
        let recv = s + channel.airtime;
        for y in 0..n {
            if channel.adj[x][y] && !sent[f][y] {
                arrival[y] = arrival[y].min(recv);
                heap.push(Reverse((OrdF64(recv), f, y)));
            }
        }
    }
    arrival
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn lexicographically_less(a: &Vec3, b: &Vec3) -> bool {
    a.iter().zip(b.iter()).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

/// Time from the injected event until every node whose routes change has
/// received a link-state update. Times are relative to the event.
///
/// Detection delays depend on `seed` and the protocol name only, so the same
/// seed gives the same detection draws at every swarm size. Background
/// beacon phases are drawn per node id.
pub fn measure_routing_update_time(
    protocol: &ProtocolConfig,
    scenario: &NetworkScenario,
    event: &TopologyEvent,
    seed: u64,
) -> Result<UpdateOutcome> {
    protocol.validate()?;
    scenario.validate()?;
    if event.before.len() != event.after.len() || event.anchor == event.moved || event.moved >= event.after.len() {
        return Err(NetworkError::InvalidInput("inconsistent topology event".into()));
    }
    let r = scenario.comm_range;
    let pre = event.adjacency_before(r);
    let post = event.adjacency_after(r);
    let affected = affected_nodes(&pre, &post);
    if affected.is_empty() {
        return Ok(UpdateOutcome::Converged { seconds: 0.0 });
    }
    let n = post.len();
    let a = scenario.beacon_airtime;
    let detect = |role: &str| SeedBuilder::new(seed, "net/update").label(&protocol.name).label(role).rng();
    let (u, v) = (event.anchor, event.moved);

    let mut background: Vec<Option<Schedule>> = vec![None; n];
    if protocol.kind != ProtocolKind::SensingTriggered && !matches!(protocol.kind, ProtocolKind::OnDemand { .. }) {
        for (i, slot) in background.iter_mut().enumerate() {
            let speed = event.after[i].velocity.norm();
            let period = protocol.beacon_interval(speed).expect("periodic protocol");
            let phase = SeedBuilder::new(seed, "net/background").label(&protocol.name).int(i as u64).rng().random_range(0.0..period);
            *slot = Some(Schedule { phase, period });
        }
    }

    let mut channel = Channel {
        adj: &post,
        airtime: a,
        background,
        busy: vec![Vec::new(); n],
    };

    let origins: Vec<(usize, f64)> = match protocol.kind {
        ProtocolKind::SensingTriggered => {
            let scan = scenario.scan_period();
            match event.kind {
                EventKind::LinkBreak => vec![
                    (u, detect("anchor").random_range(0.0..scan)),
                    (v, detect("moved").random_range(0.0..scan)),
                ],
                EventKind::LinkFormation => {
                    let (pu, pv) = (event.after[u].position, event.after[v].position);
                    let (sender, receiver) = if lexicographically_less(&pu, &pv) { (u, v) } else { (v, u) };
                    let noticed = detect("sender").random_range(0.0..scan);
                    let s = channel.transmit(sender, noticed);
                    vec![(receiver, s + a)]
                }
            }
        }
        ProtocolKind::OnDemand { route_timeout, .. } => vec![
            (u, detect("anchor").random_range(0.0..route_timeout)),
            (v, detect("moved").random_range(0.0..route_timeout)),
        ],
        _ => {
            // each endpoint's beacon schedule is re-phased from the event stream
            let mut out = Vec::new();
            for (me, other, role) in [(u, v, "anchor"), (v, u, "moved")] {
                let period = channel.background[me].expect("periodic").period;
                let phase = detect(role).random_range(0.0..period);
                channel.background[me] = Some(Schedule { phase, period });
                match event.kind {
                    // the peer hears our next beacon and reports the link
                    EventKind::LinkFormation => out.push((other, phase + a)),
                    // the peer stops hearing us one expiry after our last beacon
                    EventKind::LinkBreak => {
                        let last = phase - period;
                        out.push((other, (last + protocol.expiry_for_interval(period)).max(0.0)));
                    }
                }
            }
            out
        }
    };

    let arrival = flood(&mut channel, &origins);
    let worst = affected.iter().map(|&i| arrival[i]).fold(0.0f64, f64::max);
    Ok(if worst.is_finite() {
        UpdateOutcome::Converged { seconds: worst }
    } else {
        UpdateOutcome::Censored
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ProtocolConfig;

    fn node(id: usize, x: f64) -> NodeKinematics {
        NodeKinematics {
            id,
            position: Vec3::new(x, 300.0, 150.0),
            velocity: Vec3::zeros(),
            current_waypoint: Vec3::new(x, 300.0, 150.0),
            speed: 0.0,
        }
    }

    fn line(xs: &[f64]) -> Vec<NodeKinematics> {
        xs.iter().enumerate().map(|(i, &x)| node(i, x)).collect()
    }

    #[test]
    fn flood_without_contention_is_hop_count_airtimes() {
        let adj = vec![
            vec![false, true, false],
            vec![true, false, true],
            vec![false, true, false],
        ];
        let mut ch = Channel { adj: &adj, airtime: 0.001, background: vec![None; 3], busy: vec![Vec::new(); 3] };
        let arr = flood(&mut ch, &[(0, 0.0)]);
        assert_eq!(arr[0], 0.0);
        assert!((arr[1] - 0.001).abs() < 1e-15);
        // node 1 cannot relay until node 0's frame has left the air
        assert!((arr[2] - 0.002).abs() < 1e-15);
    }

    #[test]
    fn carrier_sense_serializes_neighbours() {
        let adj = vec![vec![false, true], vec![true, false]];
        let mut ch = Channel { adj: &adj, airtime: 0.001, background: vec![None; 2], busy: vec![Vec::new(); 2] };
        assert_eq!(ch.transmit(0, 0.0), 0.0);
        assert_eq!(ch.transmit(1, 0.0), 0.001);
        ch.background[0] = Some(Schedule { phase: 0.0025, period: 1.0 });
        assert!((ch.slot(1, 0.003) - 0.0035).abs() < 1e-15);
    }

    #[test]
    fn break_event_toggles_single_link() {
        let sc = NetworkScenario::default();
        let nodes = line(&[100.0, 250.0, 400.0]);
        let mut rng = SeedBuilder::new(1, "t").rng();
        let ev = find_topology_event(&nodes, &sc, EventKind::LinkBreak, 0.0, &mut rng).unwrap();
        let pre = ev.adjacency_before(sc.comm_range);
        let post = ev.adjacency_after(sc.comm_range);
        let toggled: usize = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).filter(|&(i, j)| pre[i][j] != post[i][j]).count();
        assert_eq!(toggled, 1);
        assert!(!post[ev.anchor][ev.moved]);
    }

    #[test]
    fn no_affected_nodes_means_zero() {
        let sc = NetworkScenario::default();
        let nodes = line(&[100.0, 200.0]);
        let ev = TopologyEvent {
            kind: EventKind::LinkBreak,
            time: 0.0,
            anchor: 0,
            moved: 1,
            before: nodes.clone(),
            after: nodes,
        };
        for p in ProtocolConfig::standard_set() {
            assert_eq!(measure_routing_update_time(&p, &sc, &ev, 1).unwrap(), UpdateOutcome::Converged { seconds: 0.0 });
        }
    }

    #[test]
    fn formation_reaches_joining_node() {
        let sc = NetworkScenario::default();
        let before = line(&[100.0, 200.0, 370.0]);
        let mut after = before.clone();
        after[2].position.x = 355.0;
        let ev = TopologyEvent { kind: EventKind::LinkFormation, time: 0.0, anchor: 1, moved: 2, before, after };
        assert_eq!(affected_nodes(&ev.adjacency_before(sc.comm_range), &ev.adjacency_after(sc.comm_range)), vec![0, 1, 2]);
        for p in ProtocolConfig::standard_set() {
            let t = measure_routing_update_time(&p, &sc, &ev, 3).unwrap().seconds().unwrap();
            assert!(t > 0.0, "{}", p.name);
        }
    }

    #[test]
    fn sensing_triggered_beats_slow_hello_on_same_event() {
        let sc = NetworkScenario::default();
        let nodes = line(&[50.0, 200.0, 340.0, 480.0]);
        let mut rng = SeedBuilder::new(2, "t").rng();
        let ev = find_topology_event(&nodes, &sc, EventKind::LinkBreak, 0.0, &mut rng).unwrap();
        let set = ProtocolConfig::standard_set();
        for seed in 0..20 {
            let st = measure_routing_update_time(&set[0], &sc, &ev, seed).unwrap().seconds().unwrap();
            let olsr = measure_routing_update_time(&set[2], &sc, &ev, seed).unwrap().seconds().unwrap();
            assert!(st < olsr, "{st} vs {olsr}");
        }
    }
}
