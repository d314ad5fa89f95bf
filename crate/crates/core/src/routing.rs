//! Shortest-path routing table precomputed with Dijkstra over hop counts.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::ids::NodeId;
use crate::topology::Network;

const NONE: u32 = u32::MAX;

/// Next-hop and distance for every ordered node pair.
#[derive(Clone, Debug)]
pub struct RoutingTable {
    n: usize,
    next: Vec<u32>,
    dist: Vec<u32>,
}

/// Single-source Dijkstra with unit link cost.
pub fn dijkstra(network: &Network, source: NodeId) -> Vec<u32> {
    let mut dist = vec![NONE; network.node_count()];
    let mut heap = BinaryHeap::new();
    dist[source.index()] = 0;
    heap.push(Reverse((0u32, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u.index()] {
            continue;
        }
        for v in network.neighbors(u) {
            let candidate = d + 1;
            if candidate < dist[v.index()] {
                dist[v.index()] = candidate;
                heap.push(Reverse((candidate, v)));
            }
        }
    }
    dist
}

impl RoutingTable {
    /// For every destination run Dijkstra once; the next hop from `s` is the
    /// smallest-id neighbor that is one hop closer to the destination.
    pub fn compute(network: &Network) -> Self {
        let n = network.node_count();
        let mut next = vec![NONE; n * n];
        let mut dist = vec![NONE; n * n];
        for d in network.nodes() {
            let to_d = dijkstra(network, d);
            for s in network.nodes() {
                dist[s.index() * n + d.index()] = to_d[s.index()];
                if s == d || to_d[s.index()] == NONE {
                    continue;
                }
                // Adjacency is sorted, so the first qualifying neighbor is the smallest.
                let hop = network
                    .neighbors(s)
                    .find(|v| to_d[v.index()] + 1 == to_d[s.index()])
                    .expect("a reachable node has a neighbor closer to the destination");
                next[s.index() * n + d.index()] = hop.0;
            }
        }
        RoutingTable { n, next, dist }
    }

    pub fn next_hop(&self, from: NodeId, to: NodeId) -> Option<NodeId> {
        match self.next[from.index() * self.n + to.index()] {
            NONE => None,
            hop => Some(NodeId(hop)),
        }
    }

    pub fn distance(&self, from: NodeId, to: NodeId) -> Option<u32> {
        match self.dist[from.index() * self.n + to.index()] {
            NONE => None,
            d => Some(d),
        }
    }

    /// Full hop sequence `from, ..., to` obtained by chasing next hops.
    pub fn path(&self, from: NodeId, to: NodeId) -> Vec<NodeId> {
        let mut path = vec![from];
        let mut here = from;
        while here != to {
            match self.next_hop(here, to) {
                Some(hop) => {
                    path.push(hop);
                    here = hop;
                }
                None => break,
            }
        }
        path
    }

    pub fn node_count(&self) -> usize {
        self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologySpec;
    use rand::SeedableRng;

    fn net(nodes: usize, links: &[[u32; 2]]) -> Network {
        TopologySpec::Explicit {
            nodes,
            links: links.iter().map(|l| l.to_vec()).collect(),
            bandwidth: 4,
        }
        .build(&mut rand_chacha::ChaCha8Rng::seed_from_u64(0))
        .unwrap()
    }

    #[test]
    fn line_next_hop() {
        let table = RoutingTable::compute(&net(3, &[[0, 1], [1, 2]]));
        assert_eq!(table.next_hop(NodeId(0), NodeId(2)), Some(NodeId(1)));
        assert_eq!(table.next_hop(NodeId(2), NodeId(0)), Some(NodeId(1)));
        assert_eq!(table.distance(NodeId(0), NodeId(2)), Some(2));
        assert_eq!(table.next_hop(NodeId(1), NodeId(1)), None);
    }

    #[test]
    fn four_cycle_tie_breaks_to_smaller_id() {
        let table = RoutingTable::compute(&net(4, &[[0, 1], [1, 2], [2, 3], [3, 0]]));
        assert_eq!(table.next_hop(NodeId(0), NodeId(2)), Some(NodeId(1)));
        assert_eq!(table.next_hop(NodeId(1), NodeId(3)), Some(NodeId(0)));
        assert_eq!(table.path(NodeId(0), NodeId(2)), vec![NodeId(0), NodeId(1), NodeId(2)]);
    }
}
