use std::collections::{BTreeMap, VecDeque};

use super::discovery::NeighborTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub next_hop: usize,
    pub hop_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingTable {
    pub owner: usize,
    pub routes: BTreeMap<usize, Route>,
}

/// Hop distances from `source`; `usize::MAX` marks unreachable nodes.
pub(crate) fn bfs_distances(adj: &[Vec<bool>], source: usize) -> Vec<usize> {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(x) = queue.pop_front() {
        for y in 0..n {
            if adj[x][y] && dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Minimum-hop routes over an undirected adjacency matrix. Among equally
/// short paths the smallest next-hop id wins; unreachable destinations get
/// no entry.
pub fn routes_from_adjacency(adj: &[Vec<bool>]) -> Vec<RoutingTable> {
    let n = adj.len();
    let dist: Vec<Vec<usize>> = (0..n).map(|d| bfs_distances(adj, d)).collect();
    (0..n)
        .map(|s| {
            let routes = (0..n)
                .filter(|&d| d != s && dist[d][s] != usize::MAX)
                .map(|d| {
                    let hops = dist[d][s];
                    let next_hop = (0..n)
                        .find(|&x| adj[s][x] && dist[d][x] + 1 == hops)
                        .expect("reachable destination has a predecessor");
                    (d, Route { next_hop, hop_count: hops })
                })
                .collect();
            RoutingTable { owner: s, routes }
        })
        .collect()
}

/// Symmetric link graph implied by the neighbor tables: `i` and `j` are
/// linked when each lists the other.
pub(crate) fn table_adjacency(tables: &[NeighborTable]) -> Vec<Vec<bool>> {
    let n = tables.len();
    let mut adj = vec![vec![false; n]; n];
    for t in tables {
        for &j in t.entries.keys() {
            if j < n && j != t.owner && tables[j].entries.contains_key(&t.owner) {
                adj[t.owner][j] = true;
            }
        }
    }
    adj
}

/// Routes every node would hold once link state has been flooded through the
/// network. `tables[i].owner` must equal `i`.
pub fn recompute_routes(tables: &[NeighborTable]) -> Vec<RoutingTable> {
    routes_from_adjacency(&table_adjacency(tables))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        adj
    }

    #[test]
    fn line_topology() {
        let r = routes_from_adjacency(&graph(3, &[(0, 1), (1, 2)]));
        assert_eq!(r[0].routes[&2], Route { next_hop: 1, hop_count: 2 });
        assert_eq!(r[2].routes[&0], Route { next_hop: 1, hop_count: 2 });
        assert!(!r[0].routes.contains_key(&0));
    }

    #[test]
    fn full_mesh_is_one_hop() {
        let n = 5;
        let edges: Vec<_> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        for t in routes_from_adjacency(&graph(n, &edges)) {
            assert_eq!(t.routes.len(), n - 1);
            assert!(t.routes.iter().all(|(d, r)| r.hop_count == 1 && r.next_hop == *d));
        }
    }

    #[test]
    fn ties_go_to_smallest_next_hop() {
        // square 0-1-3, 0-2-3
        let r = routes_from_adjacency(&graph(4, &[(0, 2), (0, 1), (1, 3), (2, 3)]));
        assert_eq!(r[0].routes[&3].next_hop, 1);
    }

    #[test]
    fn unreachable_has_no_entry() {
        let r = routes_from_adjacency(&graph(4, &[(0, 1), (2, 3)]));
        assert_eq!(r[0].routes.len(), 1);
        assert!(!r[0].routes.contains_key(&3));
    }

    #[test]
    fn one_sided_entries_are_not_links() {
        use crate::network::{EntrySource, NeighborEntry};
        let entry = NeighborEntry { position: None, velocity: None, last_update: 0.0, source: EntrySource::Beacon };
        let mut tables: Vec<NeighborTable> = (0..3)
            .map(|i| NeighborTable { owner: i, entries: BTreeMap::new() })
            .collect();
        tables[0].entries.insert(1, entry.clone());
        tables[1].entries.insert(0, entry.clone());
        tables[1].entries.insert(2, entry);
        let r = recompute_routes(&tables);
        assert_eq!(r[0].routes.len(), 1);
        assert!(!r[1].routes.contains_key(&2));
    }
}
