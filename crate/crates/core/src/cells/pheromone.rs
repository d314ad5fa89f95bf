//! AGNOSCO: infected-node localization by pheromone trails.
//!
//! Every signature detection deposits pheromone on the directed edge the
//! malicious packet arrived on, so trails point back to where attack
//! traffic came from. Ants climb those trails; a node is declared infected
//! once enough pheromone leaves it and a quorum of ants stands on it.

use std::collections::{BTreeMap, VecDeque};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ids::{NodeId, TimeStep};
use crate::topology::Network;

/// Levels below this after evaporation are cleared.
pub const CLAMP_FLOOR: f64 = 1e-6;
/// Weight applied to neighbors in the ant's recent memory.
pub const REVISIT_PENALTY: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgnoscoParams {
    /// Pheromone added per detection.
    #[serde(default = "d_deposit")]
    pub deposit: f64,
    /// Fraction removed per evaporation pass.
    #[serde(default = "d_evaporation")]
    pub evaporation: f64,
    /// Outgoing pheromone mass needed for a declaration.
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    /// Ants that must stand on a node for a declaration.
    #[serde(default = "d_quorum")]
    pub quorum: u32,
    /// Exploration floor added to every edge weight.
    #[serde(default = "d_epsilon")]
    pub epsilon: f64,
    /// Length of the ant's recent-node memory.
    #[serde(default = "d_memory")]
    pub memory: usize,
}

fn d_deposit() -> f64 {
    1.0
}
fn d_evaporation() -> f64 {
    0.02
}
fn d_threshold() -> f64 {
    5.0
}
fn d_quorum() -> u32 {
    2
}
fn d_epsilon() -> f64 {
    0.01
}
fn d_memory() -> usize {
    4
}

impl Default for AgnoscoParams {
    fn default() -> Self {
        AgnoscoParams {
            deposit: d_deposit(),
            evaporation: d_evaporation(),
            threshold: d_threshold(),
            quorum: d_quorum(),
            epsilon: d_epsilon(),
            memory: d_memory(),
        }
    }
}

/// A signature hit, as seen by the node that destroyed the packet.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionEvent {
    pub step: TimeStep,
    pub node: NodeId,
    /// `(upstream, node)`: the edge the packet arrived on.
    pub arrival_edge: (NodeId, NodeId),
    pub signature: Vec<u8>,
    /// Header source; spoofable and therefore ignored for attribution.
    pub packet_src: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PheromoneMap {
    level: BTreeMap<(NodeId, NodeId), f64>,
    evaporation: f64,
    deposit: f64,
}

impl PheromoneMap {
    pub fn new(evaporation: f64, deposit: f64) -> Self {
        PheromoneMap {
            level: BTreeMap::new(),
            evaporation,
            deposit,
        }
    }

    pub fn from_params(p: &AgnoscoParams) -> Self {
        Self::new(p.evaporation, p.deposit)
    }

    pub fn level(&self, from: NodeId, to: NodeId) -> f64 {
        self.level.get(&(from, to)).copied().unwrap_or(0.0)
    }

    pub fn set_level(&mut self, from: NodeId, to: NodeId, value: f64) {
        assert!(value >= 0.0, "pheromone levels are non-negative");
        if value == 0.0 {
            self.level.remove(&(from, to));
        } else {
            self.level.insert((from, to), value);
        }
    }

    pub fn total(&self) -> f64 {
        self.level.values().sum()
    }

    /// Sum of levels on edges directed out of `node`.
    pub fn outgoing_mass(&self, node: NodeId) -> f64 {
        self.level
            .range((node, NodeId(0))..=(node, NodeId(u32::MAX)))
            .map(|(_, v)| v)
            .sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        self.level.iter().map(|(k, v)| (*k, *v))
    }

    pub fn deposit(&mut self, ev: &DetectionEvent) {
        *self.level.entry(ev.arrival_edge).or_insert(0.0) += self.deposit;
    }

    /// Wipe the trail leading out of `node`.
    pub fn clear_outgoing(&mut self, node: NodeId) {
        self.level.retain(|&(from, _), _| from != node);
    }

    pub fn evaporate(&mut self) {
        let keep = 1.0 - self.evaporation;
        self.level.retain(|_, v| {
            *v *= keep;
            *v >= CLAMP_FLOOR
        });
    }
}

/// Pick the ant's next node. Weight of neighbor `v` is
/// `(epsilon + level(v -> here)) * novelty(v)`.
pub fn agnosco_move<R: Rng + ?Sized>(
    here: NodeId,
    memory: &VecDeque<NodeId>,
    network: &Network,
    map: &PheromoneMap,
    params: &AgnoscoParams,
    rng: &mut R,
) -> NodeId {
    let neighbors: Vec<NodeId> = network.neighbors(here).collect();
    if neighbors.len() == 1 {
        return neighbors[0];
    }
    let weights = move_weights(here, &neighbors, memory, map, params);
    let dist = WeightedIndex::new(&weights).expect("epsilon keeps weights positive");
    neighbors[dist.sample(rng)]
}

pub fn move_weights(
    here: NodeId,
    neighbors: &[NodeId],
    memory: &VecDeque<NodeId>,
    map: &PheromoneMap,
    params: &AgnoscoParams,
) -> Vec<f64> {
    neighbors
        .iter()
        .map(|&v| {
            let novelty = if memory.contains(&v) { REVISIT_PENALTY } else { 1.0 };
            (params.epsilon + map.level(v, here)) * novelty
        })
        .collect()
}

/// Nodes whose outgoing pheromone reaches `threshold` while at least
/// `quorum` ants are present, ascending by id.
pub fn agnosco_declare(map: &PheromoneMap, ants_present: &BTreeMap<NodeId, u32>, quorum: u32, threshold: f64) -> Vec<NodeId> {
    ants_present
        .iter()
        .filter(|&(_, &count)| count >= quorum)
        .map(|(&node, _)| node)
        .filter(|&node| map.outgoing_mass(node) >= threshold)
        .collect()
}
