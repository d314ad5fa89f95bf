//! Oracles shared by the integration tests and the acceptance suite. Each
//! check returns a violation count (or the raw numbers) rather than
//! panicking so the acceptance runner can report instead of abort.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sana::adversary::{attack_payload, benign_payload, AttackDef};
use sana::audit::conservation_audit;
use sana::cells::{
    agnosco_declare, anima_check, compress_signatures, AgnoscoParams, AnimaVerdict, CellKind, DetectionEvent,
    PheromoneMap, CLAMP_FLOOR,
};
use sana::comms::{gen_receptor, seal, try_open, Topic};
use sana::defense::{ComponentId, ExactMatcher};
use sana::packet::{Cargo, Packet, TrafficClass};
use sana::routing::RoutingTable;
use sana::topology::{Network, TopologySpec};
use sana::transport::{SimState, StepHandlers, Verdict};
use sana::world::World;
use sana::{CellId, NodeId, PacketId, ScenarioConfig, SubstanceId};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected random graph with 2..=`max_nodes` nodes.
pub fn small_graph<R: Rng>(max_nodes: usize, rng: &mut R) -> Network {
    let nodes = rng.random_range(2..=max_nodes);
    let p = rng.random_range(0.25..0.9);
    TopologySpec::ErdosRenyi {
        nodes,
        p,
        bandwidth: rng.random_range(1..=4),
        max_attempts: 10_000,
    }
    .build(rng)
    .expect("dense small graphs connect quickly")
}

/// Hop distances from `source` by edge relaxation.
pub fn bellman_ford(network: &Network, source: NodeId) -> Vec<Option<u32>> {
    let n = network.node_count();
    let mut dist = vec![None; n];
    dist[source.index()] = Some(0u32);
    for _ in 1..n {
        let mut changed = false;
        for link in network.links() {
            for (u, v) in [(link.a, link.b), (link.b, link.a)] {
                if let Some(du) = dist[u.index()] {
                    if dist[v.index()].is_none_or(|dv| du + 1 < dv) {
                        dist[v.index()] = Some(du + 1);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Pairs on `graphs` random graphs whose next-hop chain length differs
/// from the Bellman–Ford distance, plus the number of pairs checked.
pub fn routing_mismatches(graphs: usize, seed: u64) -> (usize, usize) {
    let mut rng = rng(seed);
    let (mut bad, mut pairs) = (0, 0);
    for _ in 0..graphs {
        let net = small_graph(8, &mut rng);
        let table = RoutingTable::compute(&net);
        for s in net.nodes() {
            let oracle = bellman_ford(&net, s);
            for d in net.nodes() {
                pairs += 1;
                let mut at = s;
                let mut hops = 0u32;
                while at != d && hops <= net.node_count() as u32 {
                    match table.next_hop(at, d) {
                        Some(next) if net.link_between(at, next).is_some() => at = next,
                        _ => break,
                    }
                    hops += 1;
                }
                let walked = (at == d).then_some(hops);
                if walked != oracle[d.index()] || table.distance(s, d) != oracle[d.index()] {
                    bad += 1;
                }
            }
        }
    }
    (bad, pairs)
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct TransportViolations {
    pub priority: u64,
    pub fifo: u64,
    pub capacity: u64,
    pub conservation: u64,
    pub injected: u64,
    pub departures: u64,
}

impl TransportViolations {
    pub fn total(&self) -> u64 {
        self.priority + self.fifo + self.capacity + self.conservation
    }
}

/// Random load generator that snapshots every queue after injection and
/// compares each node's departures against the snapshot.
struct Fuzzer {
    rng: ChaCha8Rng,
    capacity: usize,
    next_cell: u64,
    snapshot: Vec<(Vec<PacketId>, Vec<PacketId>)>,
    departed: Vec<Vec<(PacketId, TrafficClass)>>,
    v: TransportViolations,
}

impl Fuzzer {
    fn check_capacity(&mut self, sim: &SimState) {
        for node in sim.network().nodes() {
            if sim.queue(node).len() > self.capacity {
                self.v.capacity += 1;
            }
        }
    }
}

impl StepHandlers for Fuzzer {
    fn inject(&mut self, sim: &mut SimState) {
        let n = sim.network().node_count() as u32;
        // Bursty load so queues regularly fill, overflow and evict.
        let burst = if self.rng.random_bool(0.1) { 40 } else { 8 };
        for _ in 0..self.rng.random_range(0..=burst) {
            let src = NodeId(self.rng.random_range(0..n));
            let mut dst = NodeId(self.rng.random_range(0..n - 1));
            if dst.0 >= src.0 {
                dst.0 += 1;
            }
            let packet = if self.rng.random_bool(0.3) {
                self.next_cell += 1;
                Packet::immune(src, dst, Cargo::Cell(CellId(self.next_cell)))
            } else {
                Packet::data(src, dst, vec![self.rng.random()], None)
            };
            sim.inject(packet).unwrap();
            self.v.injected += 1;
        }
        self.check_capacity(sim);
        self.snapshot = sim
            .network()
            .nodes()
            .map(|node| {
                let q = sim.queue(node);
                let lane = |c| q.iter().filter(|p| p.class == c).map(|p| p.id).collect();
                (lane(TrafficClass::Immune), lane(TrafficClass::Data))
            })
            .collect();
        self.departed = vec![Vec::new(); n as usize];
    }

    fn departed(&mut self, _: &mut SimState, packet: &Packet, from: NodeId, _: NodeId) {
        self.departed[from.index()].push((packet.id, packet.class));
        self.v.departures += 1;
    }

    fn check(&mut self, _: &mut SimState, _: NodeId, _: NodeId, packet: &Packet) -> Verdict {
        if packet.class == TrafficClass::Data && self.rng.random_bool(0.02) {
            Verdict::Destroyed {
                by: ComponentId::Filter(0),
                signature: None,
            }
        } else {
            Verdict::Pass
        }
    }

    fn emit(&mut self, sim: &mut SimState) {
        self.check_capacity(sim);
        for (node, out) in self.departed.iter().enumerate() {
            let (immune, data) = &self.snapshot[node];
            let k = out.iter().take_while(|(_, c)| *c == TrafficClass::Immune).count();
            if out[k..].iter().any(|(_, c)| *c == TrafficClass::Immune) {
                self.v.priority += 1;
            }
            if k < out.len() && k < immune.len() {
                // Data left while immune traffic was still waiting.
                self.v.priority += 1;
            }
            let ids: Vec<PacketId> = out.iter().map(|(p, _)| *p).collect();
            let expect_immune = &immune[..k.min(immune.len())];
            let rest = &ids[k..];
            if ids[..k] != *expect_immune || rest.len() > data.len() || rest != &data[..rest.len()] {
                self.v.fifo += 1;
            }
        }
    }

    fn sample(&mut self, sim: &mut SimState) {
        self.check_capacity(sim);
    }
}

/// Run `steps` steps of random two-class traffic through a small random
/// network and count invariant violations.
pub fn transport_fuzz(steps: u64, seed: u64) -> TransportViolations {
    let mut r = rng(seed);
    let net = TopologySpec::ErdosRenyi {
        nodes: 10,
        p: 0.3,
        bandwidth: 2,
        max_attempts: 10_000,
    }
    .build(&mut r)
    .unwrap();
    let capacity = 6;
    let mut sim = SimState::new(net, capacity, seed);
    let mut fuzzer = Fuzzer {
        rng: r,
        capacity,
        next_cell: 0,
        snapshot: Vec::new(),
        departed: Vec::new(),
        v: TransportViolations::default(),
    };
    for _ in 0..steps {
        sim.step(&mut fuzzer);
    }
    sim.finish();
    let queued = sim.queued_total() as u64;
    let mut v = fuzzer.v;
    match conservation_audit(sim.log()) {
        Ok(report) => {
            let injected = report.data.injected + report.immune.injected;
            let in_flight = report.data.in_flight + report.immune.in_flight;
            if injected != v.injected
                || in_flight != queued
                || !report.data.balanced()
                || !report.immune.balanced()
            {
                v.conservation += 1;
            }
        }
        Err(_) => v.conservation += 1,
    }
    v
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ReceptorStats {
    pub subset_mismatches: u64,
    pub plaintext_leaks: u64,
    pub opened: u64,
    pub refused: u64,
    pub cross_matches: u64,
}

/// Open/refuse against the subset predicate over `samples` random
/// (required, held) pairs drawn from a pool of twelve receptors.
pub fn receptor_subset_oracle(samples: usize, seed: u64) -> ReceptorStats {
    let mut rng = rng(seed);
    let pool: Vec<_> = (0..12).map(|_| gen_receptor(&mut rng)).collect();
    let mut s = ReceptorStats::default();
    for i in 0..samples {
        let required: BTreeSet<usize> = loop {
            let set: BTreeSet<usize> = (0..pool.len()).filter(|_| rng.random_bool(0.25)).collect();
            if !set.is_empty() {
                break set;
            }
        };
        // Bias held sets toward covering `required` so both outcomes are common.
        let held: BTreeSet<usize> = (0..pool.len())
            .filter(|j| rng.random_bool(if required.contains(j) { 0.9 } else { 0.4 }))
            .collect();
        let len = rng.random_range(0..64);
        let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let sub = seal(
            SubstanceId(i as u64),
            Topic::Report,
            &payload,
            required.iter().map(|&j| pool[j].public).collect(),
            3,
            NodeId(0),
        )
        .unwrap();
        let keys: Vec<_> = held.iter().map(|&j| pool[j].private).collect();
        let expect = required.is_subset(&held);
        match try_open(&sub, &keys) {
            Some(bytes) => {
                s.opened += 1;
                if !expect || bytes != payload {
                    s.subset_mismatches += 1;
                }
            }
            None => {
                s.refused += 1;
                if expect {
                    s.subset_mismatches += 1;
                }
            }
        }
        if !expect && !payload.is_empty() && sub.ciphertext == payload {
            s.plaintext_leaks += 1;
        }
    }
    s
}

/// Private tokens of `count` generated receptors that match someone else's
/// public token. A private token matches exactly the public token it
/// derives, so distinct derived publics mean zero cross matches.
pub fn receptor_cross_matches(count: usize, seed: u64) -> u64 {
    let mut rng = rng(seed);
    let receptors: Vec<_> = (0..count).map(|_| gen_receptor(&mut rng)).collect();
    let mut seen = HashSet::new();
    let mut bad = 0;
    for r in &receptors {
        if !r.private.matches(&r.public) || !seen.insert(r.public) {
            bad += 1;
        }
    }
    bad
}

#[derive(Debug, Clone, Copy)]
pub struct BloomStats {
    pub false_negatives: usize,
    pub fpr: f64,
    pub target: f64,
    pub recall: f64,
    pub precision: f64,
}

pub fn random_signatures<R: Rng>(count: usize, len: usize, rng: &mut R) -> Vec<Vec<u8>> {
    let mut set = BTreeSet::new();
    while set.len() < count {
        set.insert((0..len).map(|_| rng.random()).collect::<Vec<u8>>());
    }
    set.into_iter().collect()
}

/// Membership, probe fpr and corpus recall/precision of a compressed store
/// against exact substring matching.
pub fn bloom_check(signatures: usize, target: f64, probes: usize, corpus_each: usize, seed: u64) -> BloomStats {
    let mut rng = rng(seed);
    let sigs = random_signatures(signatures, 16, &mut rng);
    let db = compress_signatures(&sigs, target).unwrap();
    let false_negatives = sigs.iter().filter(|s| !db.contains(s)).count();

    let members: HashSet<&Vec<u8>> = sigs.iter().collect();
    let mut hits = 0;
    let mut tried = 0;
    while tried < probes {
        let probe: Vec<u8> = (0..16).map(|_| rng.random()).collect();
        if members.contains(&probe) {
            continue;
        }
        tried += 1;
        hits += db.contains(&probe) as usize;
    }

    let oracle = ExactMatcher::new(sigs.iter().cloned());
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for i in 0..2 * corpus_each {
        let payload = if i % 2 == 0 {
            let attack = AttackDef {
                signature: sigs[rng.random_range(0..sigs.len())].clone(),
                ..attack_template()
            };
            attack_payload(&attack, 16, &mut rng)
        } else {
            benign_payload(16, &sigs, &mut rng)
        };
        let packet = Packet::data(NodeId(0), NodeId(1), payload, None);
        let truth = oracle.find(&packet.payload).is_some();
        let flagged = matches!(anima_check(&db, &packet), AnimaVerdict::Malicious(_));
        match (truth, flagged) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            _ => {}
        }
    }
    BloomStats {
        false_negatives,
        fpr: hits as f64 / probes as f64,
        target,
        recall: tp as f64 / (tp + fneg) as f64,
        precision: tp as f64 / (tp + fp) as f64,
    }
}

pub fn attack_template() -> AttackDef {
    AttackDef {
        id: sana::AttackId(0),
        signature: b"WORM-SIGNATURE-0".to_vec(),
        infects: true,
        fanout: 2,
        rate: 0.0,
        entry_step: None,
        entry_node: None,
        known: true,
    }
}

/// Largest relative error of the exact-deposit and evaporation identities
/// over random event sequences, plus exact-additivity violations.
pub fn pheromone_algebra(trials: usize, seed: u64) -> (u64, f64) {
    let mut rng = rng(seed);
    let mut additivity = 0;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = rng.random_range(2..=8u32);
        let deposit = [0.25, 0.5, 1.0, 2.0][rng.random_range(0..4)];
        let rho = rng.random_range(0.001..0.5);
        let mut map = PheromoneMap::new(rho, deposit);
        let mut counts: BTreeMap<(NodeId, NodeId), u32> = BTreeMap::new();
        let events = rng.random_range(0..200);
        for step in 0..events {
            let from = NodeId(rng.random_range(0..n));
            let to = NodeId(rng.random_range(0..n));
            map.deposit(&DetectionEvent {
                step,
                node: to,
                arrival_edge: (from, to),
                signature: vec![1],
                packet_src: NodeId(rng.random_range(0..n)),
            });
            *counts.entry((from, to)).or_default() += 1;
        }
        if map.total() != deposit * events as f64
            || counts.iter().any(|(&(a, b), &c)| map.level(a, b) != deposit * c as f64)
        {
            additivity += 1;
        }
        for _ in 0..rng.random_range(1..50) {
            let before: Vec<_> = map.edges().collect();
            map.evaporate();
            for ((a, b), old) in before {
                let expect = old * (1.0 - rho);
                let got = map.level(a, b);
                if expect < CLAMP_FLOOR {
                    if got != 0.0 {
                        additivity += 1;
                    }
                } else {
                    worst = worst.max((got - expect).abs() / expect);
                }
            }
        }
    }
    (additivity, worst)
}

/// A worm scenario on a small random graph, dense enough in ants and
/// pheromone for declarations to occur.
pub fn small_worm_scenario(nodes: usize) -> ScenarioConfig {
    let text = format!(
        r#"
horizon = 400

[topology]
kind = "erdos-renyi"
nodes = {nodes}
p = 0.4
bandwidth = 3

[traffic]
background_rate = 3.0
vulnerability = 0.5

[[attacks]]
id = 0
signature = "5a3a9f0c1d7e44b2a8c16e0f93d2b75e"
infects = true
fanout = 2
entry_step = 20

[cells]
detectors = 3
ants = 6
monitors = 1

[agnosco]
threshold = 5.0

[stations]
lymph = [0]
cnts = [{last}]
"#,
        last = nodes - 1
    );
    ScenarioConfig::parse(&text).unwrap()
}

/// Compare `agnosco_declare` with an exhaustive scan at every step of
/// `runs` recorded runs. Returns (mismatching snapshots, snapshots, snapshots
/// with a non-empty declaration).
pub fn declaration_oracle(runs: u64, seed: u64) -> (u64, u64, u64) {
    let (mut bad, mut total, mut nonempty) = (0, 0, 0);
    for run in 0..runs {
        let nodes = 5 + (run % 4) as usize;
        let config = small_worm_scenario(nodes);
        let params: AgnoscoParams = config.agnosco;
        let (mut sim, mut world) = World::new(&config, seed + run).unwrap();
        for _ in 0..config.horizon {
            sim.step(&mut world);
            let mut ants: BTreeMap<NodeId, u32> = BTreeMap::new();
            for c in world.cells().iter().filter(|c| c.kind() == CellKind::Ant) {
                *ants.entry(c.location).or_default() += 1;
            }
            let map = world.pheromone();
            let declared = agnosco_declare(map, &ants, params.quorum, params.threshold);
            let oracle: Vec<NodeId> = sim
                .network()
                .nodes()
                .filter(|&n| {
                    let mass: f64 = map.edges().filter(|((from, _), _)| *from == n).map(|(_, v)| v).sum();
                    mass >= params.threshold && ants.get(&n).copied().unwrap_or(0) >= params.quorum
                })
                .collect();
            total += 1;
            nonempty += !oracle.is_empty() as u64;
            bad += (declared != oracle) as u64;
        }
    }
    (bad, total, nonempty)
}
