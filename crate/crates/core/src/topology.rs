//! Static network graph: nodes, undirected links with a per-step bandwidth.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::TopologyError;
use crate::ids::NodeId;

pub const DEFAULT_BANDWIDTH: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    /// Packets per step, per direction.
    pub bandwidth: u32,
}

/// Undirected, connected, loop-free graph. Adjacency lists are sorted by
/// neighbor id so that every iteration over neighbors is deterministic.
#[derive(Clone, Debug)]
pub struct Network {
    node_count: usize,
    links: Vec<Link>,
    adjacency: Vec<Vec<(NodeId, usize)>>,
    link_index: HashMap<(NodeId, NodeId), usize>,
}

impl Network {
    pub fn new(node_count: usize, links: Vec<Link>) -> Result<Self, TopologyError> {
        if node_count < 2 {
            return Err(TopologyError::TooFewNodes(node_count));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        let mut link_index = HashMap::with_capacity(links.len() * 2);
        for (idx, link) in links.iter().enumerate() {
            let (a, b) = (link.a, link.b);
            if a.index() >= node_count || b.index() >= node_count {
                return Err(TopologyError::UnknownEndpoint(a, b));
            }
            if a == b {
                return Err(TopologyError::SelfLoop(a));
            }
            if link.bandwidth == 0 {
                return Err(TopologyError::ZeroBandwidth(a, b));
            }
            if link_index.insert((a, b), idx).is_some() || link_index.insert((b, a), idx).is_some() {
                return Err(TopologyError::DuplicateLink(a, b));
            }
            adjacency[a.index()].push((b, idx));
            adjacency[b.index()].push((a, idx));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let net = Network {
            node_count,
            links,
            adjacency,
            link_index,
        };
        if let Some(unreached) = net.first_unreachable() {
            return Err(TopologyError::DisconnectedGraph(unreached));
        }
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count as u32).map(NodeId)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.node_count
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, idx: usize) -> &Link {
        &self.links[idx]
    }

    /// Neighbors of `node` in ascending id order, paired with the link index.
    pub fn adjacent(&self, node: NodeId) -> &[(NodeId, usize)] {
        &self.adjacency[node.index()]
    }

    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[node.index()].iter().map(|&(n, _)| n)
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node.index()].len()
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.link_index.get(&(a, b)).copied()
    }

    /// Hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.node_count];
        let mut queue = VecDeque::new();
        dist[source.index()] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()].unwrap();
            for v in self.neighbors(u) {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    fn first_unreachable(&self) -> Option<NodeId> {
        self.bfs_distances(NodeId(0))
            .iter()
            .position(Option::is_none)
            .map(|i| NodeId(i as u32))
    }

    /// Shortest-path betweenness centrality (Brandes), unnormalized.
    pub fn betweenness(&self) -> Vec<f64> {
        let n = self.node_count;
        let mut centrality = vec![0.0; n];
        for s in 0..n {
            let mut stack = Vec::with_capacity(n);
            let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut sigma = vec![0.0f64; n];
            let mut dist = vec![-1i64; n];
            sigma[s] = 1.0;
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                stack.push(v);
                for (w, _) in &self.adjacency[v] {
                    let w = w.index();
                    if dist[w] < 0 {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                    if dist[w] == dist[v] + 1 {
                        sigma[w] += sigma[v];
                        preds[w].push(v);
                    }
                }
            }
            let mut delta = vec![0.0f64; n];
            while let Some(w) = stack.pop() {
                for &v in &preds[w] {
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
                if w != s {
                    centrality[w] += delta[w];
                }
            }
        }
        // Each unordered pair was counted from both ends.
        centrality.iter_mut().for_each(|c| *c /= 2.0);
        centrality
    }

    /// The `count` nodes of highest betweenness, ties to the smaller id.
    pub fn top_betweenness(&self, count: usize) -> Vec<NodeId> {
        let scores = self.betweenness();
        let mut order: Vec<usize> = (0..self.node_count).collect();
        order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(x.cmp(&y)));
        order.into_iter().take(count).map(|i| NodeId(i as u32)).collect()
    }

    pub fn diameter(&self) -> u32 {
        self.nodes()
            .map(|s| self.bfs_distances(s).into_iter().flatten().max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }
}

/// Declarative topology description, as it appears in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    /// Explicit edge list; each entry is `[a, b]` or `[a, b, bandwidth]`.
    Explicit {
        nodes: usize,
        links: Vec<Vec<u32>>,
        #[serde(default = "default_bandwidth")]
        bandwidth: u32,
    },
    /// G(n, p), resampled until connected.
    ErdosRenyi {
        nodes: usize,
        p: f64,
        #[serde(default = "default_bandwidth")]
        bandwidth: u32,
        #[serde(default = "default_attempts")]
        max_attempts: u32,
    },
    Line {
        nodes: usize,
        #[serde(default = "default_bandwidth")]
        bandwidth: u32,
    },
    Ring {
        nodes: usize,
        #[serde(default = "default_bandwidth")]
        bandwidth: u32,
    },
    Star {
        nodes: usize,
        #[serde(default = "default_bandwidth")]
        bandwidth: u32,
    },
}

fn default_bandwidth() -> u32 {
    DEFAULT_BANDWIDTH
}

fn default_attempts() -> u32 {
    1000
}

impl TopologySpec {
    pub fn node_count(&self) -> usize {
        match *self {
            TopologySpec::Explicit { nodes, .. }
            | TopologySpec::ErdosRenyi { nodes, .. }
            | TopologySpec::Line { nodes, .. }
            | TopologySpec::Ring { nodes, .. }
            | TopologySpec::Star { nodes, .. } => nodes,
        }
    }

    /// Validate and materialize the graph. Only the random kinds consume `rng`.
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Network, TopologyError> {
        let uniform = |pairs: Vec<(u32, u32)>, bw: u32| {
            pairs
                .into_iter()
                .map(|(a, b)| Link {
                    a: NodeId(a),
                    b: NodeId(b),
                    bandwidth: bw,
                })
                .collect::<Vec<_>>()
        };
        match self {
            TopologySpec::Explicit {
                nodes,
                links,
                bandwidth,
            } => {
                let mut out = Vec::with_capacity(links.len());
                for entry in links {
                    let (a, b, bw) = match entry.as_slice() {
                        [a, b] => (*a, *b, *bandwidth),
                        [a, b, bw] => (*a, *b, *bw),
                        _ => return Err(TopologyError::TooFewNodes(entry.len())),
                    };
                    out.push(Link {
                        a: NodeId(a),
                        b: NodeId(b),
                        bandwidth: bw,
                    });
                }
                Network::new(*nodes, out)
            }
            TopologySpec::ErdosRenyi {
                nodes,
                p,
                bandwidth,
                max_attempts,
            } => {
                if *nodes < 2 {
                    return Err(TopologyError::TooFewNodes(*nodes));
                }
                for _ in 0..*max_attempts {
                    let mut pairs = Vec::new();
                    for a in 0..*nodes as u32 {
                        for b in (a + 1)..*nodes as u32 {
                            if rng.random::<f64>() < *p {
                                pairs.push((a, b));
                            }
                        }
                    }
                    match Network::new(*nodes, uniform(pairs, *bandwidth)) {
                        Ok(net) => return Ok(net),
                        Err(TopologyError::DisconnectedGraph(_)) => continue,
                        Err(e) => return Err(e),
                    }
                }
                Err(TopologyError::GenerationFailed(*max_attempts))
            }
            TopologySpec::Line { nodes, bandwidth } => {
                let pairs = (1..*nodes as u32).map(|i| (i - 1, i)).collect();
                Network::new(*nodes, uniform(pairs, *bandwidth))
            }
            TopologySpec::Ring { nodes, bandwidth } => {
                let n = *nodes as u32;
                let mut pairs: Vec<(u32, u32)> = (1..n).map(|i| (i - 1, i)).collect();
                if n > 2 {
                    pairs.push((n - 1, 0));
                }
                Network::new(*nodes, uniform(pairs, *bandwidth))
            }
            TopologySpec::Star { nodes, bandwidth } => {
                let pairs = (1..*nodes as u32).map(|i| (0, i)).collect();
                Network::new(*nodes, uniform(pairs, *bandwidth))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn explicit(nodes: usize, links: &[[u32; 2]]) -> TopologySpec {
        TopologySpec::Explicit {
            nodes,
            links: links.iter().map(|l| l.to_vec()).collect(),
            bandwidth: 4,
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn line_graph_builds() {
        let net = explicit(3, &[[0, 1], [1, 2]]).build(&mut rng()).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.links().len(), 2);
        assert_eq!(net.neighbors(NodeId(1)).collect::<Vec<_>>(), vec![NodeId(0), NodeId(2)]);
    }

    #[test]
    fn isolated_node_is_rejected() {
        let err = explicit(3, &[[0, 1]]).build(&mut rng()).unwrap_err();
        assert_eq!(err, TopologyError::DisconnectedGraph(NodeId(2)));
    }

    #[test]
    fn malformed_graphs_are_rejected() {
        assert_eq!(
            explicit(2, &[[0, 0], [0, 1]]).build(&mut rng()).unwrap_err(),
            TopologyError::SelfLoop(NodeId(0))
        );
        assert_eq!(
            explicit(2, &[[0, 1], [1, 0]]).build(&mut rng()).unwrap_err(),
            TopologyError::DuplicateLink(NodeId(1), NodeId(0))
        );
        assert_eq!(
            explicit(2, &[[0, 5]]).build(&mut rng()).unwrap_err(),
            TopologyError::UnknownEndpoint(NodeId(0), NodeId(5))
        );
        assert!(matches!(
            explicit(1, &[]).build(&mut rng()),
            Err(TopologyError::TooFewNodes(1))
        ));
        let zero_bw = TopologySpec::Explicit {
            nodes: 2,
            links: vec![vec![0, 1, 0]],
            bandwidth: 4,
        };
        assert!(matches!(zero_bw.build(&mut rng()), Err(TopologyError::ZeroBandwidth(..))));
    }

    /// Independent connectivity check by plain depth-first flood over the raw link list.
    fn connected_by_flood(n: usize, links: &[Link]) -> bool {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for l in links {
                let (a, b) = (l.a.index(), l.b.index());
                let other = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    #[test]
    fn erdos_renyi_is_connected() {
        let spec = TopologySpec::ErdosRenyi {
            nodes: 50,
            p: 0.08,
            bandwidth: 4,
            max_attempts: 1000,
        };
        for seed in 0..20 {
            let net = spec.build(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(net.node_count(), 50);
            assert!(connected_by_flood(50, net.links()));
        }
    }

    #[test]
    fn betweenness_of_a_star_peaks_at_center() {
        let net = TopologySpec::Star {
            nodes: 5,
            bandwidth: 4,
        }
        .build(&mut rng())
        .unwrap();
        let b = net.betweenness();
        // Center lies on all C(4,2) = 6 leaf pairs.
        assert_eq!(b[0], 6.0);
        assert!(b[1..].iter().all(|&x| x == 0.0));
        assert_eq!(net.top_betweenness(2), vec![NodeId(0), NodeId(1)]);
    }

    #[test]
    fn betweenness_of_a_line() {
        let net = TopologySpec::Line {
            nodes: 4,
            bandwidth: 4,
        }
        .build(&mut rng())
        .unwrap();
        // Node 1 sits between {0}x{2,3}; node 2 between {0,1}x{3}.
        assert_eq!(net.betweenness(), vec![0.0, 2.0, 2.0, 0.0]);
        assert_eq!(net.diameter(), 3);
    }
}
