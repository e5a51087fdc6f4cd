use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::mobility::{NodeKinematics, SwarmMobility};
use super::protocol::{ProtocolConfig, ProtocolKind};
use super::scenario::NetworkScenario;
use super::topology::{adjacency_matrix, neighbor_accuracy, neighbor_recall, sense_peers};
use super::{Result, Vec3};
use crate::seeds::SeedBuilder;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntrySource {
    Beacon,
    Sensing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEntry {
    /// Last known kinematics; identity-only protocols carry none.
    pub position: Option<Vec3>,
    pub velocity: Option<Vec3>,
    pub last_update: f64,
    pub source: EntrySource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub owner: usize,
    pub entries: BTreeMap<usize, NeighborEntry>,
}

impl NeighborTable {
    pub fn ids(&self) -> Vec<usize> {
        self.entries.keys().copied().collect()
    }
}

/// Kinematic state of the swarm at a requested time.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Snapshot {
    pub time: f64,
    pub nodes: Vec<NodeKinematics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryRun {
    pub protocol: String,
    /// Mean Jaccard accuracy over nodes, averaged over ticks after warm-up.
    pub mean_accuracy: f64,
    pub mean_recall: f64,
    /// Lowest per-tick mean accuracy after warm-up.
    pub min_accuracy: f64,
    pub beacons_sent: u64,
    pub beacons_received: u64,
    /// Link-state updates sent in reply to sensing-triggered handshakes.
    pub link_updates_sent: u64,
    pub tables: Vec<NeighborTable>,
    pub(crate) snapshots: Vec<Snapshot>,
}

#[derive(Debug)]
enum Msg {
    Kinematic {
        from: usize,
        position: Vec3,
        velocity: Vec3,
        sent: f64,
        relayed: Vec<(usize, Vec3, Vec3, f64)>,
    },
    Hello {
        from: usize,
        interval: f64,
    },
    Handshake {
        from: usize,
        position: Vec3,
        velocity: Vec3,
        sent: f64,
        reply: bool,
    },
    LinkUpdate {
        from: usize,
        position: Vec3,
        velocity: Vec3,
        sent: f64,
    },
    RouteRequest {
        from: usize,
    },
}

#[derive(Debug, Clone, Copy)]
enum Timer {
    Beacon,
    Flood { source: usize },
    Enter { track: u64 },
    Exit { peer: usize },
}

#[derive(Debug)]
enum Event {
    Deliver { to: usize, msg: Rc<Msg> },
    Timer { node: usize, timer: Timer },
}

struct Queued {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // min-heap on (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct World<'a> {
    sc: &'a NetworkScenario,
    nodes: Vec<NodeKinematics>,
    prev: Vec<Vec3>,
    seg_vel: Vec<Vec3>,
    t_prev: f64,
    queue: BinaryHeap<Queued>,
    seq: u64,
    beacons_sent: u64,
    beacons_received: u64,
    updates_sent: u64,
}

impl World<'_> {
    fn position_at(&self, i: usize, t: f64) -> Vec3 {
        let dt = (t - self.t_prev).clamp(0.0, self.sc.tick);
        self.prev[i] + self.seg_vel[i] * dt
    }

    fn schedule(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.queue.push(Queued { time, seq: self.seq, event });
    }

    fn timer(&mut self, time: f64, node: usize, timer: Timer) {
        self.schedule(time, Event::Timer { node, timer });
    }

    /// Disk broadcast from `from` at time `t`; delivered after the airtime.
    fn broadcast(&mut self, from: usize, t: f64, msg: Msg, beacon: bool) {
        let origin = self.position_at(from, t);
        let r2 = self.sc.comm_range * self.sc.comm_range;
        let receivers: Vec<usize> = (0..self.nodes.len())
            .filter(|&j| j != from && (self.position_at(j, t) - origin).norm_squared() <= r2)
            .collect();
        if beacon {
            self.beacons_sent += 1;
            self.beacons_received += receivers.len() as u64;
        } else {
            self.updates_sent += 1;
        }
        let msg = Rc::new(msg);
        let at = t + self.sc.beacon_airtime;
        for to in receivers {
            self.schedule(at, Event::Deliver { to, msg: Rc::clone(&msg) });
        }
    }
}

trait Agent {
    fn start(&mut self, w: &mut World);
    fn on_tick(&mut self, _w: &mut World, _tick: usize, _t: f64) {}
    fn handle(&mut self, w: &mut World, t: f64, event: Event);
    fn reported(&self, i: usize, t: f64, w: &World) -> Vec<usize>;
    fn table(&self, i: usize, t: f64, w: &World) -> NeighborTable;
}

// ---------------------------------------------------------------------------
// Sensing-triggered

#[derive(Debug, Clone)]
struct Track {
    uid: u64,
    position: Vec3,
    velocity: Vec3,
    time: f64,
    id: Option<usize>,
}

impl Track {
    fn predict(&self, t: f64) -> Vec3 {
        self.position + self.velocity * (t - self.time)
    }
}

/// Entry is declared this far inside the boundary so the handshake reaches
/// the peer despite rounding in the predicted crossing time.
const ENTRY_GUARD_M: f64 = 1e-3;

struct SensingNode {
    tracks: Vec<Track>,
    table: Vec<Option<NeighborEntry>>,
}

struct SensingAgent {
    nodes: Vec<SensingNode>,
    next_uid: u64,
    rng: ChaCha8Rng,
    enter: f64,
    exit: f64,
    gate: f64,
}

/// Smallest `s >= 0` at which `|p + v s|` reaches `radius` moving inward
/// (`inward`) or outward.
fn crossing_time(p: &Vec3, v: &Vec3, radius: f64, inward: bool) -> Option<f64> {
    let a = v.norm_squared();
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * p.dot(v);
    let c = p.norm_squared() - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = if inward {
        (-b - disc.sqrt()) / (2.0 * a)
    } else {
        (-b + disc.sqrt()) / (2.0 * a)
    };
    (s >= 0.0).then_some(s)
}

fn lexicographically_less(a: &Vec3, b: &Vec3) -> bool {
    for k in 0..3 {
        match a[k].total_cmp(&b[k]) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
    }
    false
}

impl SensingAgent {
    fn new(sc: &NetworkScenario, n: usize, rng: ChaCha8Rng) -> Self {
        let band = if sc.sensing_noise_std > 0.0 { sc.hysteresis_m / 2.0 } else { 0.0 };
        Self {
            nodes: (0..n)
                .map(|_| SensingNode {
                    tracks: Vec::new(),
                    table: vec![None; n],
                })
                .collect(),
            next_uid: 0,
            rng,
            enter: sc.comm_range - band - ENTRY_GUARD_M,
            exit: sc.comm_range + band,
            gate: 3.0 + 6.0 * sc.sensing_noise_std,
        }
    }

    /// Refreshes tracks and schedules crossings; returns whether an
    /// unidentified peer is already inside range.
    fn scan(&mut self, w: &mut World, i: usize, t: f64) -> bool {
        let obs = sense_peers(i, &w.nodes, w.sc, w.sc.sensing_noise_std, &mut self.rng)
            .expect("validated noise");
        let node = &mut self.nodes[i];
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, tr) in node.tracks.iter().enumerate() {
            let pred = tr.predict(t);
            for (oi, o) in obs.iter().enumerate() {
                let d = (pred - o.position).norm();
                if d <= self.gate {
                    pairs.push((d, ti, oi));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; node.tracks.len()];
        let mut obs_track: Vec<Option<usize>> = vec![None; obs.len()];
        for (_, ti, oi) in pairs {
            if !track_used[ti] && obs_track[oi].is_none() {
                track_used[ti] = true;
                obs_track[oi] = Some(ti);
            }
        }
        let mut tracks = Vec::with_capacity(obs.len());
        for (oi, o) in obs.iter().enumerate() {
            let (uid, id) = match obs_track[oi] {
                Some(ti) => (node.tracks[ti].uid, node.tracks[ti].id),
                None => {
                    self.next_uid += 1;
                    (self.next_uid, None)
                }
            };
            tracks.push(Track {
                uid,
                position: o.position,
                velocity: o.velocity,
                time: t,
                id,
            });
        }
        node.tracks = tracks;
        // entries whose track vanished are dropped
        for j in 0..node.table.len() {
            if node.table[j].is_some() && !node.tracks.iter().any(|tr| tr.id == Some(j)) {
                node.table[j] = None;
            }
        }

        let me = w.nodes[i].position;
        let my_v = w.nodes[i].velocity;
        let horizon = w.sc.scan_period();
        let mut schedule: Vec<(f64, Timer)> = Vec::new();
        let mut send_now = false;
        for tr in node.tracks.iter() {
            let p = tr.position - me;
            let v = tr.velocity - my_v;
            let d = p.norm();
            let listed = tr.id.and_then(|j| node.table[j].as_ref().map(|_| j));
            match listed {
                Some(j) => {
                    if d > self.exit {
                        node.table[j] = None;
                    } else {
                        node.table[j] = Some(NeighborEntry {
                            position: Some(tr.position),
                            velocity: Some(tr.velocity),
                            last_update: t,
                            source: EntrySource::Sensing,
                        });
                        if let Some(s) = crossing_time(&p, &v, self.exit, false) {
                            if s <= horizon {
                                schedule.push((t + s, Timer::Exit { peer: j }));
                            }
                        }
                    }
                }
                None => {
                    if d <= self.enter {
                        match tr.id {
                            Some(j) => {
                                node.table[j] = Some(NeighborEntry {
                                    position: Some(tr.position),
                                    velocity: Some(tr.velocity),
                                    last_update: t,
                                    source: EntrySource::Sensing,
                                });
                            }
                            // inside but never identified: announce ourselves
                            None => send_now = true,
                        }
                    } else if let Some(s) = crossing_time(&p, &v, self.enter, true) {
                        if s <= horizon {
                            schedule.push((t + s, Timer::Enter { track: tr.uid }));
                        }
                    }
                }
            }
        }
        for (at, timer) in schedule {
            w.timer(at, i, timer);
        }
        send_now
    }

    fn send_handshake(&mut self, w: &mut World, i: usize, t: f64, reply: bool) {
        let msg = Msg::Handshake {
            from: i,
            position: w.position_at(i, t),
            velocity: w.seg_vel[i],
            sent: t,
            reply,
        };
        w.broadcast(i, t, msg, true);
    }

    /// Binds identity `j` to the track nearest its announced position and
    /// lists it. Returns whether the entry is new.
    fn bind(&mut self, i: usize, j: usize, position: Vec3, velocity: Vec3, t: f64) -> bool {
        let gate = self.gate;
        let node = &mut self.nodes[i];
        for tr in node.tracks.iter_mut() {
            if tr.id == Some(j) {
                tr.id = None;
            }
        }
        let best = node
            .tracks
            .iter_mut()
            .map(|tr| ((tr.predict(t) - position).norm(), tr))
            .filter(|(d, _)| *d <= gate)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match best {
            Some((_, tr)) => tr.id = Some(j),
            None => {
                self.next_uid += 1;
                node.tracks.push(Track {
                    uid: self.next_uid,
                    position,
                    velocity,
                    time: t,
                    id: Some(j),
                });
            }
        }
        let fresh = node.table[j].is_none();
        node.table[j] = Some(NeighborEntry {
            position: Some(position),
            velocity: Some(velocity),
            last_update: t,
            source: EntrySource::Beacon,
        });
        fresh
    }
}

impl Agent for SensingAgent {
    fn start(&mut self, w: &mut World) {
        let n = w.nodes.len();
        for i in 0..n {
            self.scan(w, i, 0.0);
        }
        // bootstrap: one identity beacon per node
        for i in 0..n {
            self.send_handshake(w, i, 0.0, false);
        }
    }

    fn on_tick(&mut self, w: &mut World, tick: usize, t: f64) {
        let every = w.sc.scan_ticks();
        for i in 0..w.nodes.len() {
            if (tick + i).is_multiple_of(every) && self.scan(w, i, t) {
                self.send_handshake(w, i, t, true);
            }
        }
    }

    fn handle(&mut self, w: &mut World, t: f64, event: Event) {
        match event {
            Event::Timer { node, timer: Timer::Enter { track } } => {
                let Some(tr) = self.nodes[node].tracks.iter().find(|tr| tr.uid == track).cloned() else {
                    return;
                };
                match tr.id {
                    Some(j) => {
                        if self.nodes[node].table[j].is_none() {
                            self.nodes[node].table[j] = Some(NeighborEntry {
                                position: Some(tr.predict(t)),
                                velocity: Some(tr.velocity),
                                last_update: t,
                                source: EntrySource::Sensing,
                            });
                        }
                    }
                    None => {
                        if lexicographically_less(&w.position_at(node, t), &tr.predict(t)) {
                            self.send_handshake(w, node, t, true);
                        }
                    }
                }
            }
            Event::Timer { node, timer: Timer::Exit { peer } } => {
                self.nodes[node].table[peer] = None;
            }
            Event::Deliver { to, msg } => match *msg {
                Msg::Handshake { from, position, velocity, sent, reply } => {
                    let fresh = self.bind(to, from, position + velocity * (t - sent), velocity, t);
                    if fresh && reply {
                        let msg = Msg::LinkUpdate {
                            from: to,
                            position: w.position_at(to, t),
                            velocity: w.seg_vel[to],
                            sent: t,
                        };
                        w.broadcast(to, t, msg, false);
                    }
                }
                Msg::LinkUpdate { from, position, velocity, sent } => {
                    self.bind(to, from, position + velocity * (t - sent), velocity, t);
                }
                _ => {}
            },
            _ => {}
        }
    }

    fn reported(&self, i: usize, _t: f64, _w: &World) -> Vec<usize> {
        self.nodes[i]
            .table
            .iter()
            .enumerate()
            .filter_map(|(j, e)| e.as_ref().map(|_| j))
            .collect()
    }

    fn table(&self, i: usize, _t: f64, _w: &World) -> NeighborTable {
        NeighborTable {
            owner: i,
            entries: self.nodes[i]
                .table
                .iter()
                .enumerate()
                .filter_map(|(j, e)| e.clone().map(|e| (j, e)))
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Fixed kinematic beacons

#[derive(Debug, Clone, Copy)]
struct Known {
    position: Vec3,
    velocity: Vec3,
    time: f64,
    last_direct: f64,
}

struct BeaconAgent {
    interval: f64,
    expiry: f64,
    phases: Vec<f64>,
    known: Vec<Vec<Option<Known>>>,
}

impl BeaconAgent {
    fn listed(&self, i: usize, t: f64, me: &Vec3, range: f64) -> Vec<(usize, Vec3, Vec3, f64)> {
        self.known[i]
            .iter()
            .enumerate()
            .filter_map(|(j, k)| k.map(|k| (j, k)))
            .filter(|(_, k)| t - k.time <= self.expiry)
            .map(|(j, k)| (j, k.position + k.velocity * (t - k.time), k))
            .filter(|(_, p, _)| (p - me).norm() <= range)
            .map(|(j, p, k)| (j, p, k.velocity, k.time))
            .collect()
    }
}

impl Agent for BeaconAgent {
    fn start(&mut self, w: &mut World) {
        for i in 0..w.nodes.len() {
            w.timer(self.phases[i], i, Timer::Beacon);
        }
    }

    fn handle(&mut self, w: &mut World, t: f64, event: Event) {
        match event {
            Event::Timer { node, timer: Timer::Beacon } => {
                let relayed = self.known[node]
                    .iter()
                    .enumerate()
                    .filter_map(|(j, k)| k.map(|k| (j, k)))
                    .filter(|(_, k)| t - k.last_direct <= self.expiry)
                    .map(|(j, k)| (j, k.position, k.velocity, k.time))
                    .collect();
                let msg = Msg::Kinematic {
                    from: node,
                    position: w.position_at(node, t),
                    velocity: w.seg_vel[node],
                    sent: t,
                    relayed,
                };
                w.broadcast(node, t, msg, true);
                w.timer(t + self.interval, node, Timer::Beacon);
            }
            Event::Deliver { to, msg } => {
                if let Msg::Kinematic { from, position, velocity, sent, ref relayed } = *msg {
                    self.known[to][from] = Some(Known {
                        position,
                        velocity,
                        time: sent,
                        last_direct: t,
                    });
                    for &(j, p, v, at) in relayed {
                        if j == to {
                            continue;
                        }
                        let slot = &mut self.known[to][j];
                        match slot {
                            Some(k) if k.time >= at => {}
                            Some(k) => {
                                k.position = p;
                                k.velocity = v;
                                k.time = at;
                            }
                            None => {
                                *slot = Some(Known {
                                    position: p,
                                    velocity: v,
                                    time: at,
                                    last_direct: f64::NEG_INFINITY,
                                })
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }

    fn reported(&self, i: usize, t: f64, w: &World) -> Vec<usize> {
        self.listed(i, t, &w.nodes[i].position, w.sc.comm_range)
            .into_iter()
            .map(|(j, ..)| j)
            .collect()
    }

    fn table(&self, i: usize, t: f64, w: &World) -> NeighborTable {
        NeighborTable {
            owner: i,
            entries: self
                .listed(i, t, &w.nodes[i].position, w.sc.comm_range)
                .into_iter()
                .map(|(j, p, v, at)| {
                    (
                        j,
                        NeighborEntry {
                            position: Some(p),
                            velocity: Some(v),
                            last_update: at,
                            source: EntrySource::Beacon,
                        },
                    )
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Identity-only hellos and route-request floods

struct HelloAgent {
    protocol: ProtocolConfig,
    phases: Vec<f64>,
    /// `heard[i][j] = (time, lifetime)`.
    heard: Vec<Vec<Option<(f64, f64)>>>,
    rng: ChaCha8Rng,
}

impl HelloAgent {
    fn on_demand(&self) -> Option<(f64, usize)> {
        match self.protocol.kind {
            ProtocolKind::OnDemand { route_timeout, flows } => Some((route_timeout, flows)),
            _ => None,
        }
    }

    fn live(&self, i: usize, t: f64) -> Vec<usize> {
        self.heard[i]
            .iter()
            .enumerate()
            .filter_map(|(j, h)| h.filter(|(at, life)| t - at <= *life).map(|_| j))
            .collect()
    }

    fn flood(&mut self, w: &mut World, source: usize, t: f64) {
        let n = w.nodes.len();
        let positions: Vec<Vec3> = (0..n).map(|i| w.position_at(i, t)).collect();
        let adj = adjacency_matrix(&positions, w.sc.comm_range);
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([source]);
        seen[source] = true;
        while let Some(x) = queue.pop_front() {
            w.broadcast(x, t, Msg::RouteRequest { from: x }, true);
            for y in 0..n {
                if adj[x][y] && !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
    }
}

impl Agent for HelloAgent {
    fn start(&mut self, w: &mut World) {
        if let Some((timeout, flows)) = self.on_demand() {
            let period = timeout / flows as f64;
            let source = self.rng.random_range(0..w.nodes.len());
            w.timer(self.phases[0] * period / timeout, source, Timer::Flood { source });
        } else {
            for i in 0..w.nodes.len() {
                w.timer(self.phases[i], i, Timer::Beacon);
            }
        }
    }

    fn handle(&mut self, w: &mut World, t: f64, event: Event) {
        match event {
            Event::Timer { node, timer: Timer::Beacon } => {
                let speed = w.seg_vel[node].norm();
                let interval = self.protocol.beacon_interval(speed).expect("periodic protocol");
                w.broadcast(node, t, Msg::Hello { from: node, interval }, true);
                w.timer(t + interval, node, Timer::Beacon);
            }
            Event::Timer { timer: Timer::Flood { source }, .. } => {
                self.flood(w, source, t);
                let (timeout, flows) = self.on_demand().expect("flood timer");
                let next = self.rng.random_range(0..w.nodes.len());
                w.timer(t + timeout / flows as f64, next, Timer::Flood { source: next });
            }
            Event::Deliver { to, msg } => match *msg {
                Msg::Hello { from, interval } => {
                    self.heard[to][from] = Some((t, self.protocol.expiry_for_interval(interval)));
                }
                Msg::RouteRequest { from } => {
                    let (timeout, _) = self.on_demand().expect("route request");
                    self.heard[to][from] = Some((t, self.protocol.expiry.unwrap_or(timeout)));
                }
                _ => {}
            },
            _ => {}
        }
    }

    fn reported(&self, i: usize, t: f64, _w: &World) -> Vec<usize> {
        self.live(i, t)
    }

    fn table(&self, i: usize, t: f64, _w: &World) -> NeighborTable {
        NeighborTable {
            owner: i,
            entries: self
                .live(i, t)
                .into_iter()
                .map(|j| {
                    (
                        j,
                        NeighborEntry {
                            position: None,
                            velocity: None,
                            last_update: self.heard[i][j].expect("live").0,
                            source: EntrySource::Beacon,
                        },
                    )
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------

fn make_agent(protocol: &ProtocolConfig, sc: &NetworkScenario, seed: u64) -> Box<dyn Agent> {
    let n = sc.node_count;
    let mut rng = SeedBuilder::new(seed, "net/protocol").label(&protocol.name).rng();
    match protocol.kind {
        ProtocolKind::SensingTriggered => Box::new(SensingAgent::new(sc, n, rng)),
        ProtocolKind::FixedBeacon { interval } => Box::new(BeaconAgent {
            interval,
            expiry: protocol.expiry_for_interval(interval),
            phases: (0..n).map(|_| rng.random_range(0.0..interval)).collect(),
            known: vec![vec![None; n]; n],
        }),
        _ => {
            let first = |rng: &mut ChaCha8Rng| match protocol.kind {
                ProtocolKind::PeriodicHello { interval, .. } => rng.random_range(0.0..interval),
                ProtocolKind::AdaptiveHello { min_interval, .. } => rng.random_range(0.0..min_interval),
                ProtocolKind::OnDemand { route_timeout, .. } => rng.random_range(0.0..route_timeout),
                _ => 0.0,
            };
            let phases = (0..n).map(|_| first(&mut rng)).collect();
            Box::new(HelloAgent {
                protocol: protocol.clone(),
                phases,
                heard: vec![vec![None; n]; n],
                rng,
            })
        }
    }
}

fn drain(agent: &mut dyn Agent, w: &mut World, until: f64) {
    while w.queue.peek().is_some_and(|q| q.time <= until) {
        let q = w.queue.pop().expect("peeked");
        agent.handle(w, q.time, q.event);
    }
}

/// Runs one protocol over the scenario and reports accuracy and overhead.
///
/// Each node's trajectory depends only on `seed` and its id, so runs with the
/// same seed share trajectories across protocols and swarm sizes.
pub fn run_discovery(protocol: &ProtocolConfig, scenario: &NetworkScenario, seed: u64) -> Result<DiscoveryRun> {
    run_discovery_with_snapshots(protocol, scenario, seed, &[])
}

pub(crate) fn run_discovery_with_snapshots(
    protocol: &ProtocolConfig,
    scenario: &NetworkScenario,
    seed: u64,
    snapshot_times: &[f64],
) -> Result<DiscoveryRun> {
    protocol.validate()?;
    if protocol.kind == ProtocolKind::SensingTriggered {
        scenario.validate_for_sensing()?;
    } else {
        scenario.validate()?;
    }
    let (mut mobility, nodes) = SwarmMobility::new(seed, scenario);
    let positions: Vec<Vec3> = nodes.iter().map(|n| n.position).collect();
    let mut w = World {
        sc: scenario,
        seg_vel: nodes.iter().map(|n| n.velocity).collect(),
        prev: positions,
        nodes,
        t_prev: 0.0,
        queue: BinaryHeap::new(),
        seq: 0,
        beacons_sent: 0,
        beacons_received: 0,
        updates_sent: 0,
    };
    let mut agent = make_agent(protocol, scenario, seed);
    agent.start(&mut w);
    drain(agent.as_mut(), &mut w, 0.0);

    let mut snaps: Vec<f64> = snapshot_times.to_vec();
    snaps.sort_by(f64::total_cmp);
    let mut snaps = snaps.into_iter().peekable();
    let mut snapshots = Vec::new();
    let (mut acc_sum, mut rec_sum, mut samples) = (0.0, 0.0, 0usize);
    let mut min_accuracy = 1.0f64;
    let n = scenario.node_count;
    let ticks = scenario.ticks();
    for k in 1..=ticks {
        let t = k as f64 * scenario.tick;
        w.prev = w.nodes.iter().map(|n| n.position).collect();
        w.t_prev = t - scenario.tick;
        mobility.step(&mut w.nodes, scenario, scenario.tick)?;
        w.seg_vel = w
            .nodes
            .iter()
            .zip(&w.prev)
            .map(|(n, p)| (n.position - p) / scenario.tick)
            .collect();
        drain(agent.as_mut(), &mut w, t);
        agent.on_tick(&mut w, k, t);
        drain(agent.as_mut(), &mut w, t);

        while snaps.peek().is_some_and(|&s| s <= t + 1e-12) {
            snaps.next();
            snapshots.push(Snapshot { time: t, nodes: w.nodes.clone() });
        }
        if t + 1e-12 >= scenario.warmup {
            let positions: Vec<Vec3> = w.nodes.iter().map(|n| n.position).collect();
            let adj = adjacency_matrix(&positions, scenario.comm_range);
            let (mut a, mut r) = (0.0, 0.0);
            for (i, row) in adj.iter().enumerate() {
                let truth: Vec<usize> = (0..n).filter(|&j| row[j]).collect();
                let reported = agent.reported(i, t, &w);
                a += neighbor_accuracy(&reported, &truth);
                r += neighbor_recall(&reported, &truth);
            }
            let tick_acc = a / n as f64;
            min_accuracy = min_accuracy.min(tick_acc);
            acc_sum += tick_acc;
            rec_sum += r / n as f64;
            samples += 1;
        }
    }
    let t_end = ticks as f64 * scenario.tick;
    let tables = (0..n).map(|i| agent.table(i, t_end, &w)).collect();
    Ok(DiscoveryRun {
        protocol: protocol.name.clone(),
        mean_accuracy: acc_sum / samples.max(1) as f64,
        mean_recall: rec_sum / samples.max(1) as f64,
        min_accuracy,
        beacons_sent: w.beacons_sent,
        beacons_received: w.beacons_received,
        link_updates_sent: w.updates_sent,
        tables,
        snapshots,
    })
}
