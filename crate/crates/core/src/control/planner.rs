use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dynamics::EquivalentSphere;
use super::{ControlError, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    /// Center at environment time zero.
    pub sphere: EquivalentSphere,
    pub velocity: Vec3,
}

impl Obstacle {
    pub fn center_at(&self, t: f64) -> Vec3 {
        self.sphere.center + self.velocity * t
    }
}

/// Box `[0, bounds]` with constant-velocity spherical obstacles. Paths are
/// flown from time zero at the planner speed, so a point is checked against
/// where each obstacle will be when the vehicle gets there.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment3d {
    pub bounds: Vec3,
    pub obstacles: Vec<Obstacle>,
    /// Added to every obstacle radius (vehicle radius plus margins).
    pub clearance: f64,
}

impl Environment3d {
    pub fn new(bounds: Vec3, obstacles: Vec<Obstacle>, clearance: f64) -> Result<Self> {
        if bounds.iter().any(|b| !(*b > 0.0)) || !(clearance >= 0.0) {
            return Err(ControlError::InvalidInput("bounds must be positive, clearance non-negative".into()));
        }
        let env = Self { bounds, obstacles, clearance };
        for o in &env.obstacles {
            if !(o.sphere.equivalent_radius > 0.0) || !env.in_bounds(o.sphere.center) {
                return Err(ControlError::InvalidInput(format!(
                    "obstacle at {:?} must have positive radius and lie inside bounds",
                    o.sphere.center
                )));
            }
        }
        Ok(env)
    }

    pub fn empty(bounds: Vec3) -> Result<Self> {
        Self::new(bounds, Vec::new(), 0.0)
    }

    pub fn in_bounds(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] >= 0.0 && p[i] <= self.bounds[i])
    }

    pub fn is_static(&self) -> bool {
        self.obstacles.iter().all(|o| o.velocity == Vec3::zeros())
    }

    pub fn point_free(&self, p: Vec3, t: f64) -> bool {
        self.in_bounds(p)
            && self
                .obstacles
                .iter()
                .all(|o| (p - o.center_at(t)).norm() > o.sphere.equivalent_radius + self.clearance)
    }

    /// Straight flight from `a` (reached at time `t_a`) to `b` at `speed`.
    pub fn segment_free(&self, a: Vec3, t_a: f64, b: Vec3, speed: f64) -> bool {
        if !self.in_bounds(a) || !self.in_bounds(b) {
            return false;
        }
        let len = (b - a).norm();
        if len == 0.0 {
            return self.point_free(a, t_a);
        }
        let dir = (b - a) / len;
        let duration = len / speed;
        self.obstacles.iter().all(|o| {
            let p0 = a - o.center_at(t_a);
            let w = dir * speed - o.velocity;
            let ww = w.norm_squared();
            let tau = if ww > 0.0 { (-p0.dot(&w) / ww).clamp(0.0, duration) } else { 0.0 };
            (p0 + w * tau).norm() > o.sphere.equivalent_radius + self.clearance
        })
    }

    /// Volume-derived constant for the shrinking rewiring radius.
    pub fn rewire_gamma(&self) -> f64 {
        let volume = self.bounds.x * self.bounds.y * self.bounds.z;
        let unit_ball = 4.0 / 3.0 * std::f64::consts::PI;
        2.0 * (1.0 + 1.0 / 3.0_f64).cbrt() * (volume / unit_ball).cbrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub position: Vec3,
    pub parent: Option<usize>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanTree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
    /// Root to the node that connects to the goal; empty when not reached.
    pub goal_path: Vec<usize>,
    pub goal: Vec3,
}

impl PlanTree {
    pub fn found(&self) -> bool {
        !self.goal_path.is_empty()
    }

    /// Waypoints from the root to the goal.
    pub fn path(&self) -> Vec<Vec3> {
        let mut out: Vec<Vec3> = self.goal_path.iter().map(|&i| self.nodes[i].position).collect();
        if let Some(last) = out.last() {
            if (last - self.goal).norm() > 1e-9 {
                out.push(self.goal);
            }
        }
        out
    }

    pub fn path_length(&self) -> f64 {
        polyline_length(&self.path())
    }

    /// Checks the single root, acyclic parents and cost consistency.
    pub fn audit(&self) -> Result<()> {
        let bad = |m: String| Err(ControlError::InvalidInput(m));
        let n = self.nodes.len();
        if n == 0 {
            return bad("empty tree".into());
        }
        if self.nodes[0].parent.is_some() || self.nodes[0].cost != 0.0 {
            return bad("node 0 must be a zero-cost root".into());
        }
        for (i, node) in self.nodes.iter().enumerate().skip(1) {
            let Some(p) = node.parent else { return bad(format!("node {i} has no parent")) };
            if p >= n {
                return bad(format!("node {i} parent {p} out of range"));
            }
            let want = self.nodes[p].cost + (node.position - self.nodes[p].position).norm();
            if (node.cost - want).abs() > 1e-6 * want.max(1.0) {
                return bad(format!("node {i} cost {} != {want}", node.cost));
            }
            let mut cur = i;
            for _ in 0..n {
                match self.nodes[cur].parent {
                    Some(q) => cur = q,
                    None => break,
                }
            }
            if cur != 0 {
                return bad(format!("node {i} does not reach the root"));
            }
        }
        for w in self.goal_path.windows(2) {
            if self.nodes[w[1]].parent != Some(w[0]) {
                return bad("goal path does not follow tree edges".into());
            }
        }
        if self.goal_path.first().is_some_and(|&r| r != 0) {
            return bad("goal path must start at the root".into());
        }
        Ok(())
    }
}

pub fn polyline_length(path: &[Vec3]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrtSettings {
    pub iterations: usize,
    pub step_length: f64,
    pub goal_radius: f64,
    /// Probability of sampling the goal instead of a uniform point.
    pub goal_bias: f64,
    /// Flight speed used to time-stamp nodes, m/s.
    pub speed: f64,
}

impl Default for RrtSettings {
    fn default() -> Self {
        Self {
            iterations: 1000,
            step_length: 5.0,
            goal_radius: 5.0,
            goal_bias: 0.1,
            speed: 10.0,
        }
    }
}

impl RrtSettings {
    fn validate(&self) -> Result<()> {
        if !(self.step_length > 0.0 && self.goal_radius > 0.0 && self.speed > 0.0)
            || !(0.0..=1.0).contains(&self.goal_bias)
        {
            return Err(ControlError::InvalidInput(format!("bad planner settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub tree: PlanTree,
    pub expansions: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct ReplanOutcome {
    pub tree: PlanTree,
    pub path: Vec<Vec3>,
    pub expansions: usize,
    /// Wall-clock seconds.
    pub replanning_delay: f64,
    pub success: bool,
}

struct Grower<'a> {
    env: &'a Environment3d,
    settings: RrtSettings,
    gamma: f64,
    goal: Vec3,
    nodes: Vec<TreeNode>,
    children: Vec<Vec<usize>>,
    dynamic: bool,
}

impl<'a> Grower<'a> {
    fn new(env: &'a Environment3d, settings: RrtSettings, goal: Vec3, nodes: Vec<TreeNode>) -> Self {
        let mut children = vec![Vec::new(); nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                children[p].push(i);
            }
        }
        Self {
            env,
            settings,
            gamma: env.rewire_gamma(),
            goal,
            nodes,
            children,
            dynamic: !env.is_static(),
        }
    }

    fn time(&self, i: usize) -> f64 {
        self.nodes[i].cost / self.settings.speed
    }

    fn edge_free(&self, from: usize, to: Vec3) -> bool {
        self.env.segment_free(self.nodes[from].position, self.time(from), to, self.settings.speed)
    }

    fn radius(&self) -> f64 {
        let n = self.nodes.len().max(2) as f64;
        (self.gamma * (n.ln() / n).cbrt()).max(self.settings.step_length)
    }

    fn nearest(&self, p: Vec3) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.position - p).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn near(&self, p: Vec3, r: f64) -> Vec<usize> {
        let r2 = r * r;
        (0..self.nodes.len())
            .filter(|&i| (self.nodes[i].position - p).norm_squared() <= r2)
            .collect()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        if rng.random::<f64>() < self.settings.goal_bias {
            return self.goal;
        }
        let b = self.env.bounds;
        Vec3::new(
            rng.random_range(0.0..=b.x),
            rng.random_range(0.0..=b.y),
            rng.random_range(0.0..=b.z),
        )
    }

    fn shift_subtree(&mut self, root: usize, delta: f64) {
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            self.nodes[i].cost += delta;
            stack.extend(self.children[i].iter().copied());
        }
    }

    /// Whether every edge under `x` stays clear once `x` arrives `delta` earlier.
    fn subtree_clear(&self, x: usize, delta: f64) -> bool {
        let speed = self.settings.speed;
        let mut stack = vec![x];
        while let Some(i) = stack.pop() {
            let t = (self.nodes[i].cost + delta) / speed;
            for &c in &self.children[i] {
                if !self.env.segment_free(self.nodes[i].position, t, self.nodes[c].position, speed) {
                    return false;
                }
                stack.push(c);
            }
        }
        true
    }

    fn reparent(&mut self, x: usize, parent: usize, cost: f64) {
        if let Some(old) = self.nodes[x].parent {
            self.children[old].retain(|&c| c != x);
        }
        self.children[parent].push(x);
        self.nodes[x].parent = Some(parent);
        let delta = cost - self.nodes[x].cost;
        self.shift_subtree(x, delta);
    }

    fn connects_to_goal(&self, i: usize) -> bool {
        let d = (self.nodes[i].position - self.goal).norm();
        d <= self.settings.goal_radius && self.edge_free(i, self.goal)
    }

    /// One sample-steer-connect-rewire round. Returns the new node, if any.
    fn extend(&mut self, rng: &mut ChaCha8Rng) -> Option<usize> {
        let target = self.sample(rng);
        let nearest = self.nearest(target);
        let from = self.nodes[nearest].position;
        let d = (target - from).norm();
        if d < 1e-9 {
            return None;
        }
        let step = self.settings.step_length;
        let new = if d <= step { target } else { from + (target - from) * (step / d) };

        let r = self.radius();
        let mut near = self.near(new, r);
        if !near.contains(&nearest) {
            near.push(nearest);
        }
        let mut ranked: Vec<(f64, usize)> = near
            .iter()
            .map(|&i| (self.nodes[i].cost + (self.nodes[i].position - new).norm(), i))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (cost, parent) = *ranked.iter().find(|&&(_, i)| self.edge_free(i, new))?;

        let id = self.nodes.len();
        self.nodes.push(TreeNode { position: new, parent: Some(parent), cost });
        self.children.push(Vec::new());
        self.children[parent].push(id);

        for &x in &near {
            if x == parent {
                continue;
            }
            let via = cost + (self.nodes[x].position - new).norm();
            let delta = via - self.nodes[x].cost;
            if delta < -1e-12
                && self.env.segment_free(new, cost / self.settings.speed, self.nodes[x].position, self.settings.speed)
                && (!self.dynamic || self.subtree_clear(x, delta))
            {
                self.reparent(x, id, via);
            }
        }
        Some(id)
    }

    fn best_goal(&self) -> Option<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.connects_to_goal(i))
            .min_by(|&a, &b| {
                let ca = self.nodes[a].cost + (self.nodes[a].position - self.goal).norm();
                let cb = self.nodes[b].cost + (self.nodes[b].position - self.goal).norm();
                ca.total_cmp(&cb).then(a.cmp(&b))
            })
    }

    /// Runs up to `budget` rounds, stopping early on the first goal
    /// connection when `until_found`. Returns rounds used.
    fn grow(&mut self, rng: &mut ChaCha8Rng, budget: usize, until_found: bool) -> usize {
        for k in 0..budget {
            let added = self.extend(rng);
            if until_found && added.is_some_and(|i| self.connects_to_goal(i)) {
                return k + 1;
            }
        }
        budget
    }

    fn finish(self) -> PlanTree {
        let goal_path = match self.best_goal() {
            Some(mut i) => {
                let mut p = vec![i];
                while let Some(q) = self.nodes[i].parent {
                    p.push(q);
                    i = q;
                }
                p.reverse();
                p
            }
            None => Vec::new(),
        };
        PlanTree { nodes: self.nodes, goal_path, goal: self.goal }
    }
}

fn check_start(env: &Environment3d, p: Vec3, what: &str) -> Result<()> {
    if !env.point_free(p, 0.0) {
        return Err(ControlError::InvalidInput(format!("{what} {p:?} is outside bounds or inside an obstacle")));
    }
    Ok(())
}

/// The arrival time at the goal is unknown, so only static obstacles can
/// rule it out.
fn check_goal(env: &Environment3d, p: Vec3) -> Result<()> {
    let blocked = env
        .obstacles
        .iter()
        .any(|o| o.velocity == Vec3::zeros() && (p - o.sphere.center).norm() <= o.sphere.equivalent_radius + env.clearance);
    if !env.in_bounds(p) || blocked {
        return Err(ControlError::InvalidInput(format!("goal {p:?} is outside bounds or inside an obstacle")));
    }
    Ok(())
}

/// RRT* from `start` toward the goal region. An unreached goal is not an
/// error: the tree comes back with an empty goal path.
pub fn rrt_star(env: &Environment3d, start: Vec3, goal: Vec3, settings: &RrtSettings, seed: u64) -> Result<PlanOutcome> {
    settings.validate()?;
    check_start(env, start, "start")?;
    check_goal(env, goal)?;
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = TreeNode { position: start, parent: None, cost: 0.0 };
    let mut g = Grower::new(env, *settings, goal, vec![root]);
    let expansions = g.grow(&mut rng, settings.iterations, false);
    let tree = g.finish();
    Ok(PlanOutcome { tree, expansions, elapsed: clock.elapsed() })
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Replans on an existing tree: edges are re-validated while costs are
/// recomputed from the new root, cut-off branches are reattached to nearby
/// survivors, and fresh samples are added only if the goal is still out of
/// reach.
pub fn replan_with_reuse(
    tree: &PlanTree,
    env_updated: &Environment3d,
    current_position: Vec3,
    goal: Vec3,
    settings: &RrtSettings,
    seed: u64,
) -> Result<ReplanOutcome> {
    let clock = Instant::now();
    settings.validate()?;
    if tree.nodes.is_empty() {
        return Err(ControlError::InvalidInput("cannot reuse an empty tree".into()));
    }
    check_start(env_updated, current_position, "current position")?;
    check_goal(env_updated, goal)?;
    let speed = settings.speed;
    let mut pos: Vec<Vec3> = tree.nodes.iter().map(|n| n.position).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); pos.len()];
    for (i, n) in tree.nodes.iter().enumerate() {
        if let Some(p) = n.parent {
            adj[i].push(p);
            adj[p].push(i);
        }
    }
    let gamma = env_updated.rewire_gamma();
    let radius = |n: usize| {
        let n = n.max(2) as f64;
        (gamma * (n.ln() / n).cbrt()).max(settings.step_length)
    };

    let root = match pos.iter().position(|p| (p - current_position).norm() < 1e-9) {
        Some(i) => i,
        None => {
            let id = pos.len();
            let r = radius(id + 1);
            let mut links: Vec<usize> = (0..id).filter(|&i| (pos[i] - current_position).norm() <= r).collect();
            if links.is_empty() {
                let nearest = (0..id)
                    .min_by(|&a, &b| {
                        (pos[a] - current_position).norm().total_cmp(&(pos[b] - current_position).norm())
                    })
                    .expect("tree is non-empty");
                links.push(nearest);
            }
            pos.push(current_position);
            adj.push(Vec::new());
            for &i in &links {
                adj[id].push(i);
                adj[i].push(id);
            }
            id
        }
    };

    let n = pos.len();
    let mut cost = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    cost[root] = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, root)]);
    let relax = |u: usize, v: usize, cost: &mut [f64], parent: &mut [Option<usize>], heap: &mut BinaryHeap<Entry>| {
        let c = cost[u] + (pos[v] - pos[u]).norm();
        if c < cost[v] && env_updated.segment_free(pos[u], cost[u] / speed, pos[v], speed) {
            cost[v] = c;
            parent[v] = Some(u);
            heap.push(Entry(c, v));
        }
    };
    while let Some(Entry(c, u)) = heap.pop() {
        if settled[u] || c > cost[u] {
            continue;
        }
        settled[u] = true;
        for &v in &adj[u] {
            if !settled[v] {
                relax(u, v, &mut cost, &mut parent, &mut heap);
            }
        }
    }

    let goal_reached = |settled: &[bool], cost: &[f64]| {
        (0..n).any(|i| {
            settled[i]
                && (pos[i] - goal).norm() <= settings.goal_radius
                && env_updated.segment_free(pos[i], cost[i] / speed, goal, speed)
        })
    };

    if !goal_reached(&settled, &cost) {
        // reattach branches cut off from the root
        let r = radius(n);
        let mut orphans: Vec<usize> = (0..n).filter(|&i| !settled[i]).collect();
        let mut heap: BinaryHeap<Entry> = (0..n).filter(|&i| settled[i]).map(|i| Entry(cost[i], i)).collect();
        let mut done = settled.clone();
        let mut expanded = vec![false; n];
        while let Some(Entry(c, u)) = heap.pop() {
            if c > cost[u] || expanded[u] {
                continue;
            }
            expanded[u] = true;
            if !settled[u] {
                done[u] = true;
                for &v in &adj[u] {
                    if !done[v] {
                        relax(u, v, &mut cost, &mut parent, &mut heap);
                    }
                }
            }
            orphans.retain(|&v| !done[v]);
            for &v in &orphans {
                if (pos[v] - pos[u]).norm() <= r {
                    relax(u, v, &mut cost, &mut parent, &mut heap);
                }
            }
        }
        settled = done;
    }

    // compact, parents before children
    let mut order = vec![root];
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        if settled[v] && v != root {
            if let Some(p) = parent[v] {
                kids[p].push(v);
            }
        }
    }
    let mut k = 0;
    while k < order.len() {
        let u = order[k];
        order.extend(kids[u].iter().copied());
        k += 1;
    }
    let mut index = vec![usize::MAX; n];
    for (new, &old) in order.iter().enumerate() {
        index[old] = new;
    }
    let nodes: Vec<TreeNode> = order
        .iter()
        .map(|&old| TreeNode {
            position: pos[old],
            parent: if old == root { None } else { parent[old].map(|p| index[p]) },
            cost: if old == root { 0.0 } else { cost[old] },
        })
        .collect();

    let mut g = Grower::new(env_updated, *settings, goal, nodes);
    let mut expansions = 0;
    if g.best_goal().is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        expansions = g.grow(&mut rng, settings.iterations, true);
    }
    let tree = g.finish();
    let path = tree.path();
    Ok(ReplanOutcome {
        success: tree.found(),
        path,
        tree,
        expansions,
        replanning_delay: clock.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> Vec3 {
        Vec3::new(300.0, 300.0, 100.0)
    }

    fn obstacle(c: Vec3, r: f64, v: Vec3) -> Obstacle {
        Obstacle { sphere: EquivalentSphere { center: c, equivalent_radius: r }, velocity: v }
    }

    /// Samples every path point at 5 cm and checks it against every obstacle.
    fn dense_ok(env: &Environment3d, path: &[Vec3], speed: f64) -> bool {
        let mut t0 = 0.0;
        for w in path.windows(2) {
            let len = (w[1] - w[0]).norm();
            let k = (len / 0.05).ceil().max(1.0) as usize;
            for j in 0..=k {
                let s = j as f64 / k as f64;
                let p = w[0] + (w[1] - w[0]) * s;
                let t = t0 + s * len / speed;
                if (0..3).any(|i| p[i] < 0.0 || p[i] > env.bounds[i]) {
                    return false;
                }
                for o in &env.obstacles {
                    let c = o.sphere.center + o.velocity * t;
                    if (p - c).norm() <= o.sphere.equivalent_radius + env.clearance {
                        return false;
                    }
                }
            }
            t0 += len / speed;
        }
        true
    }

    #[test]
    fn gamma_matches_volume_rule() {
        let g = Environment3d::empty(bounds()).unwrap().rewire_gamma();
        assert!((g - 284.0).abs() < 1.0, "{g}");
    }

    #[test]
    fn moving_obstacle_segment_check() {
        // obstacle crosses x = 50 at t = 5
        let env = Environment3d::new(bounds(), vec![obstacle(Vec3::new(50.0, 50.0, 50.0), 5.0, Vec3::new(0.0, 10.0, 0.0))], 0.0).unwrap();
        let a = Vec3::new(0.0, 100.0, 50.0);
        let b = Vec3::new(100.0, 100.0, 50.0);
        assert!(!env.segment_free(a, 0.0, b, 10.0));
        assert!(env.segment_free(a, 0.0, b, 20.0));
        assert!(env.point_free(Vec3::new(50.0, 100.0, 50.0), 0.0));
        assert!(!env.point_free(Vec3::new(50.0, 100.0, 50.0), 5.0));
    }

    #[test]
    fn empty_space_path_is_nearly_straight() {
        let env = Environment3d::empty(bounds()).unwrap();
        let (s, g) = (Vec3::new(20.0, 20.0, 50.0), Vec3::new(280.0, 250.0, 50.0));
        let out = rrt_star(&env, s, g, &RrtSettings::default(), 7).unwrap();
        out.tree.audit().unwrap();
        assert!(out.tree.found());
        assert!(out.tree.path_length() <= 1.3 * (g - s).norm());
        assert_eq!(out.expansions, 1000);
    }

    #[test]
    fn goal_inside_obstacle_is_rejected() {
        let env = Environment3d::new(bounds(), vec![obstacle(Vec3::new(200.0, 200.0, 50.0), 20.0, Vec3::zeros())], 0.0).unwrap();
        let r = rrt_star(&env, Vec3::new(10.0, 10.0, 10.0), Vec3::new(205.0, 200.0, 50.0), &RrtSettings::default(), 1);
        assert!(r.is_err());
    }

    #[test]
    fn paths_avoid_static_and_moving_obstacles() {
        let env = Environment3d::new(
            bounds(),
            vec![
                obstacle(Vec3::new(150.0, 150.0, 50.0), 40.0, Vec3::zeros()),
                obstacle(Vec3::new(220.0, 60.0, 50.0), 25.0, Vec3::new(0.0, 4.0, 0.0)),
            ],
            1.0,
        )
        .unwrap();
        for seed in 0..5 {
            let out = rrt_star(&env, Vec3::new(20.0, 150.0, 50.0), Vec3::new(280.0, 150.0, 50.0), &RrtSettings::default(), seed).unwrap();
            out.tree.audit().unwrap();
            assert!(out.tree.found());
            assert!(dense_ok(&env, &out.tree.path(), 10.0));
        }
    }

    #[test]
    fn noop_update_returns_the_same_path() {
        let env = Environment3d::empty(bounds()).unwrap();
        let (s, g) = (Vec3::new(20.0, 150.0, 50.0), Vec3::new(280.0, 150.0, 50.0));
        let out = rrt_star(&env, s, g, &RrtSettings::default(), 3).unwrap();
        let re = replan_with_reuse(&out.tree, &env, s, g, &RrtSettings::default(), 4).unwrap();
        assert!(re.success);
        assert_eq!(re.expansions, 0);
        assert_eq!(re.path, out.tree.path());
        re.tree.audit().unwrap();
    }

    #[test]
    fn reuse_avoids_new_obstacle() {
        let settings = RrtSettings::default();
        let empty = Environment3d::empty(bounds()).unwrap();
        let (s, g) = (Vec3::new(20.0, 150.0, 50.0), Vec3::new(280.0, 150.0, 50.0));
        let out = rrt_star(&empty, s, g, &settings, 11).unwrap();
        for r in [20.0, 40.0, 60.0] {
            let env = Environment3d::new(
                bounds(),
                vec![obstacle(Vec3::new(150.0, 100.0, 50.0), r, Vec3::new(0.0, 5.0, 0.0))],
                2.0,
            )
            .unwrap();
            let here = Vec3::new(30.0, 150.0, 50.0);
            let re = replan_with_reuse(&out.tree, &env, here, g, &settings, 12).unwrap();
            re.tree.audit().unwrap();
            assert!(re.success, "radius {r}");
            assert_eq!(re.path[0], here);
            assert!(dense_ok(&env, &re.path, settings.speed), "radius {r}");
        }
    }

    #[test]
    fn same_seed_same_tree() {
        let env = Environment3d::empty(bounds()).unwrap();
        let a = rrt_star(&env, Vec3::new(1.0, 1.0, 1.0), Vec3::new(100.0, 100.0, 50.0), &RrtSettings::default(), 9).unwrap();
        let b = rrt_star(&env, Vec3::new(1.0, 1.0, 1.0), Vec3::new(100.0, 100.0, 50.0), &RrtSettings::default(), 9).unwrap();
        assert_eq!(a.tree, b.tree);
    }
}
