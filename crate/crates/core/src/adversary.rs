//! Background traffic, attack injection and worm propagation.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::event::EventKind;
use crate::ids::{AttackId, NodeId, TimeStep};
use crate::packet::Packet;
use crate::topology::Network;

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(text).map_err(serde::de::Error::custom)
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackDef {
    pub id: AttackId,
    /// Hex in scenario files.
    #[serde(with = "hex_bytes")]
    pub signature: Vec<u8>,
    #[serde(default)]
    pub infects: bool,
    /// Packets per step emitted by each node this attack has infected.
    #[serde(default)]
    pub fanout: u32,
    /// Mean attack packets per step injected from random sources.
    #[serde(default)]
    pub rate: f64,
    /// Worm entry time; `None` means the attack never enters on its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_step: Option<TimeStep>,
    /// Entry node; defaults to a random vulnerable node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_node: Option<NodeId>,
    /// Whether detectors start out carrying this signature.
    #[serde(default = "yes")]
    pub known: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeHealth {
    pub vulnerable: bool,
    pub infected_by: Option<AttackId>,
    pub infected_at: Option<TimeStep>,
}

impl NodeHealth {
    pub fn is_infected(&self) -> bool {
        self.infected_by.is_some()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateDistribution {
    /// Exactly `rate` per step; fractional parts carry over.
    Fixed,
    #[default]
    Poisson,
}

/// Draws per-step packet counts for a mean rate.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSampler {
    rate: f64,
    distribution: RateDistribution,
    carry: f64,
}

impl RateSampler {
    pub fn new(rate: f64, distribution: RateDistribution) -> Self {
        RateSampler {
            rate,
            distribution,
            carry: 0.0,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u64 {
        if self.rate <= 0.0 {
            return 0;
        }
        match self.distribution {
            RateDistribution::Fixed => {
                self.carry += self.rate;
                let n = self.carry.floor();
                self.carry -= n;
                n as u64
            }
            RateDistribution::Poisson => Poisson::new(self.rate).expect("positive rate").sample(rng) as u64,
        }
    }
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Uniform `(src, dst)` with `src != dst`.
pub fn random_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (NodeId, NodeId) {
    let src = rng.random_range(0..n as u32);
    let mut dst = rng.random_range(0..n as u32 - 1);
    if dst >= src {
        dst += 1;
    }
    (NodeId(src), NodeId(dst))
}

/// Random bytes that contain none of `signatures`.
pub fn benign_payload<R: Rng + ?Sized>(len: usize, signatures: &[Vec<u8>], rng: &mut R) -> Vec<u8> {
    let mut payload = vec![0u8; len];
    loop {
        rng.fill(payload.as_mut_slice());
        if !signatures.iter().any(|s| contains(&payload, s)) {
            return payload;
        }
    }
}

pub fn inject_background<R: Rng + ?Sized>(
    network: &Network,
    sampler: &mut RateSampler,
    payload_len: usize,
    signatures: &[Vec<u8>],
    rng: &mut R,
) -> Vec<Packet> {
    let count = sampler.draw(rng);
    (0..count)
        .map(|_| {
            let (src, dst) = random_pair(network.node_count(), rng);
            Packet::data(src, dst, benign_payload(payload_len, signatures, rng), None)
        })
        .collect()
}

/// Random filler of at least `payload_len` bytes with the signature at a random offset.
pub fn attack_payload<R: Rng + ?Sized>(attack: &AttackDef, payload_len: usize, rng: &mut R) -> Vec<u8> {
    let len = payload_len.max(attack.signature.len());
    let mut payload = vec![0u8; len];
    rng.fill(payload.as_mut_slice());
    let at = rng.random_range(0..=len - attack.signature.len());
    payload[at..at + attack.signature.len()].copy_from_slice(&attack.signature);
    payload
}

/// Worm entry through a security hole. Returns `None` when the node is
/// already infected (repeat spawns are no-ops).
pub fn spawn_worm(
    health: &mut [NodeHealth],
    attack: &AttackDef,
    entry: NodeId,
    clock: TimeStep,
) -> Result<Option<EventKind>, SimError> {
    let h = health.get_mut(entry.index()).ok_or(SimError::UnknownNode(entry))?;
    if h.is_infected() {
        return Ok(None);
    }
    if !h.vulnerable {
        return Ok(Some(EventKind::EntryFailed {
            node: entry,
            attack: attack.id,
        }));
    }
    h.infected_by = Some(attack.id);
    h.infected_at = Some(clock);
    Ok(Some(EventKind::Infect {
        node: entry,
        attack: attack.id,
        packet: None,
    }))
}

/// `fanout` copies of the worm sent from an infected node to uniformly random other nodes.
pub fn worm_emit<R: Rng + ?Sized>(
    network: &Network,
    health: &NodeHealth,
    node: NodeId,
    attack: &AttackDef,
    payload_len: usize,
    rng: &mut R,
) -> Vec<Packet> {
    if health.infected_by != Some(attack.id) || network.node_count() < 2 {
        return Vec::new();
    }
    let n = network.node_count() as u32;
    (0..attack.fanout)
        .map(|_| {
            let mut dst = rng.random_range(0..n - 1);
            if dst >= node.0 {
                dst += 1;
            }
            Packet::data(node, NodeId(dst), attack_payload(attack, payload_len, rng), Some(attack.id))
        })
        .collect()
}

/// An attack packet reached its destination. Only infecting attacks on
/// clean, vulnerable nodes change anything.
pub fn on_attack_delivery(
    health: &mut NodeHealth,
    attack: &AttackDef,
    node: NodeId,
    packet: &Packet,
    clock: TimeStep,
) -> Option<EventKind> {
    if !attack.infects || !health.vulnerable || health.is_infected() {
        return None;
    }
    health.infected_by = Some(attack.id);
    health.infected_at = Some(clock);
    Some(EventKind::Infect {
        node,
        attack: attack.id,
        packet: Some(packet.id),
    })
}

/// Caps adversary injections at each source to the node's total outgoing
/// bandwidth per step. Excess waits in a per-node backlog and goes first
/// on later steps.
#[derive(Clone, Debug)]
pub struct SourceGate {
    budget: Vec<u32>,
    used: Vec<u32>,
    backlog: Vec<VecDeque<Packet>>,
}

impl SourceGate {
    pub fn new(network: &Network) -> Self {
        let budget = network
            .nodes()
            .map(|n| network.adjacent(n).iter().map(|&(_, l)| network.link(l).bandwidth).sum())
            .collect();
        SourceGate {
            budget,
            used: vec![0; network.node_count()],
            backlog: vec![VecDeque::new(); network.node_count()],
        }
    }

    /// Start a new step; returns backlogged packets that now fit.
    pub fn reset(&mut self) -> Vec<Packet> {
        self.used.iter_mut().for_each(|u| *u = 0);
        let mut ready = Vec::new();
        for (node, queue) in self.backlog.iter_mut().enumerate() {
            while self.used[node] < self.budget[node] {
                let Some(p) = queue.pop_front() else { break };
                self.used[node] += 1;
                ready.push(p);
            }
        }
        ready
    }

    /// Admit `packet` now, or defer it.
    pub fn admit(&mut self, packet: Packet) -> Option<Packet> {
        let src = packet.src.index();
        if self.backlog[src].is_empty() && self.used[src] < self.budget[src] {
            self.used[src] += 1;
            Some(packet)
        } else {
            self.backlog[src].push_back(packet);
            None
        }
    }

    /// Forget attack packets still waiting at `node`; a cleaned host has
    /// nothing left to send.
    pub fn purge_attacks(&mut self, node: NodeId) {
        self.backlog[node.index()].retain(|p| p.attack.is_none());
    }

    pub fn backlog_len(&self) -> usize {
        self.backlog.iter().map(VecDeque::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologySpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn worm() -> AttackDef {
        AttackDef {
            id: AttackId(0),
            signature: b"SIG!".to_vec(),
            infects: true,
            fanout: 3,
            rate: 0.0,
            entry_step: Some(0),
            entry_node: None,
            known: true,
        }
    }

    fn ring(n: usize) -> Network {
        TopologySpec::Ring { nodes: n, bandwidth: 4 }
            .build(&mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
    }

    #[test]
    fn fixed_rate_is_exact() {
        let net = ring(6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut zero = RateSampler::new(0.0, RateDistribution::Fixed);
        assert!(inject_background(&net, &mut zero, 8, &[], &mut rng).is_empty());
        let mut five = RateSampler::new(5.0, RateDistribution::Fixed);
        let total: usize = (0..100)
            .map(|_| inject_background(&net, &mut five, 8, &[], &mut rng).len())
            .sum();
        assert_eq!(total, 500);
        let mut half = RateSampler::new(0.5, RateDistribution::Fixed);
        assert_eq!((0..10).map(|_| half.draw(&mut rng)).sum::<u64>(), 5);
    }

    #[test]
    fn background_is_benign_and_distinct() {
        let net = ring(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sigs = vec![vec![0u8]];
        let mut s = RateSampler::new(50.0, RateDistribution::Fixed);
        for p in inject_background(&net, &mut s, 32, &sigs, &mut rng) {
            assert_ne!(p.src, p.dst);
            assert!(!p.payload.contains(&0));
            assert_eq!(p.attack, None);
        }
    }

    #[test]
    fn spawn_rules() {
        let mut health = vec![
            NodeHealth {
                vulnerable: true,
                ..Default::default()
            },
            NodeHealth::default(),
        ];
        let w = worm();
        assert!(matches!(
            spawn_worm(&mut health, &w, NodeId(0), 5).unwrap(),
            Some(EventKind::Infect { packet: None, .. })
        ));
        assert_eq!(health[0].infected_by, Some(AttackId(0)));
        assert_eq!(health[0].infected_at, Some(5));
        assert_eq!(spawn_worm(&mut health, &w, NodeId(0), 6).unwrap(), None);
        assert!(matches!(
            spawn_worm(&mut health, &w, NodeId(1), 6).unwrap(),
            Some(EventKind::EntryFailed { .. })
        ));
        assert!(!health[1].is_infected());
        assert_eq!(spawn_worm(&mut health, &w, NodeId(9), 6), Err(SimError::UnknownNode(NodeId(9))));
    }

    #[test]
    fn emission_carries_signature() {
        let net = ring(5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = worm();
        let infected = NodeHealth {
            vulnerable: true,
            infected_by: Some(w.id),
            infected_at: Some(0),
        };
        let out = worm_emit(&net, &infected, NodeId(2), &w, 16, &mut rng);
        assert_eq!(out.len(), 3);
        for p in &out {
            assert!(contains(&p.payload, b"SIG!"));
            assert_ne!(p.dst, NodeId(2));
            assert_eq!(p.attack, Some(w.id));
        }
        assert!(worm_emit(&net, &NodeHealth::default(), NodeId(2), &w, 16, &mut rng).is_empty());
    }

    #[test]
    fn delivery_infects_once() {
        let w = worm();
        let p = Packet::data(NodeId(0), NodeId(1), b"SIG!".to_vec(), Some(w.id));
        let mut clean = NodeHealth {
            vulnerable: true,
            ..Default::default()
        };
        assert!(on_attack_delivery(&mut clean, &w, NodeId(1), &p, 3).is_some());
        assert!(on_attack_delivery(&mut clean, &w, NodeId(1), &p, 4).is_none());
        let mut hardened = NodeHealth::default();
        assert!(on_attack_delivery(&mut hardened, &w, NodeId(1), &p, 3).is_none());
        assert_eq!(hardened, NodeHealth::default());
    }

    #[test]
    fn gate_defers_excess() {
        let net = TopologySpec::Line { nodes: 2, bandwidth: 2 }
            .build(&mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let mut gate = SourceGate::new(&net);
        gate.reset();
        let admitted = (0..5)
            .filter_map(|_| gate.admit(Packet::data(NodeId(0), NodeId(1), vec![], None)))
            .count();
        assert_eq!(admitted, 2);
        assert_eq!(gate.backlog_len(), 3);
        assert_eq!(gate.reset().len(), 2);
        assert_eq!(gate.reset().len(), 1);
        assert_eq!(gate.backlog_len(), 0);
    }
}
