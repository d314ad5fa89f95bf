//! The assembled system: adversary, defense stack, cells and stations
//! wired into the transport's step phases.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{
    attack_payload, inject_background, on_attack_delivery, random_pair, spawn_worm, worm_emit, AttackDef, NodeHealth,
    RateSampler, SourceGate,
};
use crate::cells::{
    agnosco_declare, cell_step, disinfect_apply, Action, CellKind, CellParams, CellPopulation, CellState,
    CompressedSignatureDb, DetectionEvent, DisinfectOutcome, NodeContext, PheromoneMap, StatusRecord,
};
use crate::comms::{
    cnts_release, gen_receptor, lymph_on_report, lymph_route, seal, try_open, Cnts, Holder, InfectionReport,
    LymphNode, Receptor, RouteAction, StationDirectory, Substance, Topic,
};
use crate::defense::{ComponentId, DefenseStack, ExactMatcher, StaticIds};
use crate::error::ScenarioError;
use crate::event::{EventKind, RetireReason};
use crate::ids::{AttackId, CellId, NodeId, StationId, SubstanceId, TimeStep};
use crate::packet::{Cargo, Packet};
use crate::queue::EnqueueOutcome;
use crate::scenario::ScenarioConfig;
use crate::transport::{SimState, StepHandlers, Verdict};

const STREAM_TOPOLOGY: u64 = 0;
const STREAM_SETUP: u64 = 1;
const STREAM_TRAFFIC: u64 = 2;
const STREAM_WORM: u64 = 3;
const STREAM_CELLS: u64 = 4;
const STREAM_COMMS: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Shared role receptors. Every member of a role holds the role's private part.
#[derive(Clone, Debug)]
struct Roles {
    lymph: Receptor,
    cnts: Receptor,
    detector: Receptor,
    ant: Receptor,
    monitor: Receptor,
    disinfector: Receptor,
    admin: Receptor,
}

impl Roles {
    fn for_kind(&self, kind: CellKind) -> &Receptor {
        match kind {
            CellKind::Detector => &self.detector,
            CellKind::Ant => &self.ant,
            CellKind::Monitor => &self.monitor,
            CellKind::Disinfector => &self.disinfector,
        }
    }
}

/// Receptor-holding sink for monitor reports.
#[derive(Clone, Debug)]
pub struct Administrator {
    pub location: NodeId,
    pub records: Vec<StatusRecord>,
}

struct WormEntry {
    step: TimeStep,
    attack: usize,
    node: NodeId,
}

pub struct World {
    attacks: Vec<AttackDef>,
    signatures: Vec<Vec<u8>>,
    health: Vec<NodeHealth>,
    payload_len: usize,
    background: RateSampler,
    attack_rates: Vec<RateSampler>,
    entries: Vec<WormEntry>,
    gate: SourceGate,
    defense: DefenseStack,
    cells: CellPopulation,
    params: CellParams,
    db_fpr: f64,
    flush_every: usize,
    caps: BTreeMap<CellKind, u32>,
    pheromone: PheromoneMap,
    /// Last signature seen on traffic that left each node.
    hints: BTreeMap<NodeId, Vec<u8>>,
    /// Declared nodes not yet re-armed.
    latched: BTreeSet<NodeId>,
    /// Disinfector -> station that started it.
    dispatched: BTreeMap<CellId, StationId>,
    lymph: Vec<LymphNode>,
    cnts: Vec<Cnts>,
    directory: StationDirectory,
    admin: Administrator,
    roles: Roles,
    radius: u32,
    dedupe: u64,
    ttl: u32,
    next_substance: u64,
    rng_traffic: ChaCha8Rng,
    rng_worm: ChaCha8Rng,
    rng_cells: ChaCha8Rng,
}

impl World {
    /// Build the network and everything living on it. Setup events
    /// (initial spawns) are logged at step 0.
    pub fn new(config: &ScenarioConfig, seed: u64) -> Result<(SimState, World), ScenarioError> {
        config.validate()?;
        let network = config.topology.build(&mut stream(seed, STREAM_TOPOLOGY))?;
        let mut setup = stream(seed, STREAM_SETUP);
        let mut rng_comms = stream(seed, STREAM_COMMS);
        let n = network.node_count();

        let health: Vec<NodeHealth> = (0..n)
            .map(|_| NodeHealth {
                vulnerable: setup.random::<f64>() < config.traffic.vulnerability,
                ..Default::default()
            })
            .collect();
        let vulnerable: Vec<NodeId> = network.nodes().filter(|v| health[v.index()].vulnerable).collect();
        let all: Vec<NodeId> = network.nodes().collect();
        let entries = config
            .attacks
            .iter()
            .enumerate()
            .filter_map(|(i, a)| {
                let step = a.entry_step?;
                let pool = if vulnerable.is_empty() { &all } else { &vulnerable };
                let node = a.entry_node.unwrap_or_else(|| *pool.choose(&mut setup).expect("non-empty"));
                Some(WormEntry { step, attack: i, node })
            })
            .collect();

        let roles = Roles {
            lymph: gen_receptor(&mut rng_comms),
            cnts: gen_receptor(&mut rng_comms),
            detector: gen_receptor(&mut rng_comms),
            ant: gen_receptor(&mut rng_comms),
            monitor: gen_receptor(&mut rng_comms),
            disinfector: gen_receptor(&mut rng_comms),
            admin: gen_receptor(&mut rng_comms),
        };
        let s = &config.stations;
        let lymph: Vec<LymphNode> = s
            .lymph
            .iter()
            .enumerate()
            .map(|(i, &at)| LymphNode::new(StationId(i as u32), at, vec![roles.lymph.private]))
            .collect();
        let signatures: Vec<Vec<u8>> = config.attacks.iter().map(|a| a.signature.clone()).collect();
        let known: Vec<Vec<u8>> = config
            .attacks
            .iter()
            .filter(|a| a.known)
            .map(|a| a.signature.clone())
            .collect();
        let cnts = s
            .cnts
            .iter()
            .enumerate()
            .map(|(i, &at)| Cnts {
                id: StationId((lymph.len() + i) as u32),
                location: at,
                receptors: vec![roles.cnts.private],
                period: s.cnts_period,
                mix: s.cnts_mix.iter().map(|(&k, &c)| (k, c)).collect(),
                trained: known.clone(),
                inbox: Vec::new(),
            })
            .collect();
        let directory = StationDirectory::new(lymph.iter().map(|l| (l.id, l.location)).collect());

        let mut defense = DefenseStack::new(n);
        for (i, f) in config.defense.filters.iter().enumerate() {
            defense
                .register_filter(f.node, i as u32, f.rules.clone())
                .map_err(|e| ScenarioError::validation("defense.filters", e.to_string()))?;
        }
        let mut ids_nodes: Vec<NodeId> = config.defense.ids.clone();
        for v in network.top_betweenness(config.defense.ids_top_betweenness) {
            if !ids_nodes.contains(&v) {
                ids_nodes.push(v);
            }
        }
        for (i, &at) in ids_nodes.iter().enumerate() {
            let ids = StaticIds {
                placement: at,
                matcher: ExactMatcher::new(signatures.iter().cloned()),
            };
            defense
                .register_ids(i as u32, ids)
                .map_err(|e| ScenarioError::validation("defense.ids", e.to_string()))?;
        }

        let c = &config.cells;
        let mut caps = BTreeMap::new();
        for kind in [CellKind::Detector, CellKind::Ant, CellKind::Monitor, CellKind::Disinfector] {
            if let Some(cap) = c.cap(kind) {
                caps.insert(kind, cap);
            }
        }
        let ttl = s.ttl.unwrap_or(4 * network.diameter().max(1));
        let mut sim = SimState::new(network.clone(), config.network.queue_capacity, seed);
        let mut world = World {
            attack_rates: config
                .attacks
                .iter()
                .map(|a| RateSampler::new(a.rate, config.traffic.distribution))
                .collect(),
            attacks: config.attacks.clone(),
            signatures,
            health,
            payload_len: config.traffic.payload_len,
            background: RateSampler::new(config.traffic.background_rate, config.traffic.distribution),
            entries,
            gate: SourceGate::new(&network),
            defense,
            cells: CellPopulation::new(),
            params: CellParams {
                p_move: c.p_move,
                agnosco: config.agnosco,
            },
            db_fpr: c.db_fpr,
            flush_every: c.monitor_flush,
            caps,
            pheromone: PheromoneMap::from_params(&config.agnosco),
            hints: BTreeMap::new(),
            latched: BTreeSet::new(),
            dispatched: BTreeMap::new(),
            lymph,
            cnts,
            directory,
            admin: Administrator {
                location: s.admin,
                records: Vec::new(),
            },
            roles,
            radius: s.radius,
            dedupe: s.dedupe,
            ttl,
            next_substance: 0,
            rng_traffic: stream(seed, STREAM_TRAFFIC),
            rng_worm: stream(seed, STREAM_WORM),
            rng_cells: stream(seed, STREAM_CELLS),
        };

        for (kind, count) in [
            (CellKind::Detector, c.detectors),
            (CellKind::Ant, c.ants),
            (CellKind::Monitor, c.monitors),
        ] {
            for _ in 0..count {
                let at = NodeId(setup.random_range(0..n as u32));
                let state = world.fresh_state(kind, &known);
                world.spawn(&mut sim, at, state, None);
            }
        }
        Ok((sim, world))
    }

    pub fn health(&self) -> &[NodeHealth] {
        &self.health
    }

    pub fn cells(&self) -> &CellPopulation {
        &self.cells
    }

    pub fn pheromone(&self) -> &PheromoneMap {
        &self.pheromone
    }

    pub fn defense(&self) -> &DefenseStack {
        &self.defense
    }

    pub fn lymph_nodes(&self) -> &[LymphNode] {
        &self.lymph
    }

    pub fn cnts(&self) -> &[Cnts] {
        &self.cnts
    }

    pub fn admin(&self) -> &Administrator {
        &self.admin
    }

    pub fn backlog(&self) -> usize {
        self.gate.backlog_len()
    }

    /// Sized for every signature in the scenario, so learning later never
    /// pushes the filter past its design false-positive rate.
    fn detector_db(&self, signatures: &[Vec<u8>]) -> CompressedSignatureDb {
        let mut db = CompressedSignatureDb::with_capacity(self.signatures.len(), self.db_fpr).expect("validated fpr");
        for s in signatures {
            db.insert(s).expect("validated signature");
        }
        db
    }

    fn fresh_state(&self, kind: CellKind, signatures: &[Vec<u8>]) -> CellState {
        match kind {
            CellKind::Detector => CellState::Detector {
                db: self.detector_db(signatures),
            },
            CellKind::Ant => CellState::Ant { memory: VecDeque::new() },
            CellKind::Monitor => CellState::Monitor {
                buffer: Vec::new(),
                flush_every: self.flush_every,
            },
            CellKind::Disinfector => panic!("disinfectors need a target"),
        }
    }

    fn spawn(&mut self, sim: &mut SimState, at: NodeId, state: CellState, station: Option<StationId>) -> CellId {
        let kind = state.kind();
        let receptors = vec![self.roles.for_kind(kind).private];
        let id = self.cells.insert(at, state, receptors, sim.clock());
        if kind == CellKind::Detector {
            self.defense.register_cell(at, id).expect("fresh cell id");
        }
        sim.record(EventKind::Spawn {
            cell: id,
            kind,
            node: at,
            station,
        });
        id
    }

    fn retire(&mut self, sim: &mut SimState, id: CellId, reason: RetireReason) {
        let Some(cell) = self.cells.remove(id) else {
            return;
        };
        let component = ComponentId::Cell(id);
        if let Some(at) = self.defense.location(component) {
            self.defense.deregister(at, component).expect("registered");
        }
        debug_assert_eq!(cell.id, id);
        self.dispatched.remove(&id);
        sim.record(EventKind::Retire { cell: id, reason });
    }

    fn fresh_substance_id(&mut self) -> SubstanceId {
        let id = SubstanceId(self.next_substance);
        self.next_substance += 1;
        id
    }

    fn seal_to(&mut self, topic: Topic, payload: &[u8], role: &Receptor, origin: NodeId) -> Substance {
        let id = self.fresh_substance_id();
        seal(id, topic, payload, [role.public].into(), self.ttl, origin).expect("one receptor")
    }

    /// Put a substance on the wire from `from` to `to`.
    fn send(&mut self, sim: &mut SimState, mut sub: Substance, from: NodeId, to: NodeId, recipient: Option<StationId>) {
        sub.recipient = recipient;
        sim.record(EventKind::SubstanceSend {
            substance: sub.id,
            topic: sub.topic,
            origin: sub.origin,
            dst: Some(to),
        });
        let packet = Packet::immune(from, to, Cargo::Substance(Box::new(sub)));
        sim.inject(packet).expect("stations sit on valid nodes");
    }

    fn inject_gated(&mut self, sim: &mut SimState, packet: Packet) {
        if let Some(p) = self.gate.admit(packet) {
            sim.inject(p).expect("generated on valid nodes");
        }
    }

    fn attack_index(&self, id: AttackId) -> Option<usize> {
        self.attacks.iter().position(|a| a.id == id)
    }

    fn cell_arrived(&mut self, sim: &mut SimState, id: CellId, from: NodeId, at: NodeId) {
        let Some(cell) = self.cells.get_mut(id) else {
            return;
        };
        cell.location = at;
        cell.in_transit = false;
        if cell.kind() == CellKind::Detector {
            self.defense.register_cell(at, id).expect("deregistered on departure");
        }
        sim.record(EventKind::CellMove { cell: id, from, to: at });
    }

    fn deliver_substance(&mut self, sim: &mut SimState, sub: Substance, node: NodeId) {
        let lymph_count = self.lymph.len() as u32;
        match sub.recipient {
            Some(StationId(s)) if s < lymph_count => self.lymph[s as usize].inbox.push(sub),
            Some(StationId(s)) => self.cnts[(s - lymph_count) as usize].inbox.push(sub),
            None => {
                if let Some(bytes) = try_open(&sub, &[self.roles.admin.private]) {
                    sim.record(EventKind::SubstanceOpen {
                        substance: sub.id,
                        node,
                        by: Holder::Admin,
                    });
                    if let Some(records) = StatusRecord::decode_batch(&bytes) {
                        self.admin.records.extend(records);
                    }
                } else {
                    sim.record(EventKind::SubstanceDrop { substance: sub.id, node });
                }
            }
        }
    }

    fn open_detector_inboxes(&mut self, sim: &mut SimState) {
        for id in self.cells.ids_of(CellKind::Detector) {
            let cell = self.cells.get_mut(id).expect("listed");
            if cell.inbox.is_empty() {
                continue;
            }
            let inbox = std::mem::take(&mut cell.inbox);
            for sub in inbox {
                let Some(signature) = try_open(&sub, &cell.receptors) else {
                    continue;
                };
                sim.record(EventKind::SubstanceOpen {
                    substance: sub.id,
                    node: cell.location,
                    by: Holder::Cell(id),
                });
                if let CellState::Detector { db } = &mut cell.state {
                    if !signature.is_empty() && !db.contains(&signature) {
                        db.insert(&signature).expect("non-empty");
                    }
                }
            }
        }
    }

    fn run_cells(&mut self, sim: &mut SimState) {
        for id in self.cells.ids() {
            let Some(cell) = self.cells.get_mut(id) else {
                continue;
            };
            if cell.in_transit {
                continue;
            }
            let here = cell.location;
            let ctx = NodeContext {
                network: sim.network(),
                pheromone: &self.pheromone,
                clock: sim.clock(),
                occupancy: sim.queue(here).len(),
            };
            let actions = cell_step(cell, &ctx, &self.params, &mut self.rng_cells);
            for action in actions {
                match action {
                    Action::Travel(dst) => {
                        let packet = Packet::immune(here, dst, Cargo::Cell(id));
                        let (_, outcome) = sim.inject(packet).expect("valid nodes");
                        if !matches!(outcome, EnqueueOutcome::Dropped(_)) {
                            self.cells.get_mut(id).expect("alive").in_transit = true;
                        }
                    }
                    Action::Disinfect(target) => {
                        let outcome = disinfect_apply(&mut self.health[target.index()]);
                        if outcome == DisinfectOutcome::Disinfected {
                            self.gate.purge_attacks(target);
                        }
                        sim.record(match outcome {
                            DisinfectOutcome::Disinfected => EventKind::Disinfect { node: target, cell: id },
                            DisinfectOutcome::FalsePositive => EventKind::FalseDisinfect { node: target, cell: id },
                        });
                        if let Some(station) = self.dispatched.get(&id) {
                            self.lymph[station.index()].resolve(target);
                        }
                        self.pheromone.clear_outgoing(target);
                        self.latched.remove(&target);
                        self.retire(sim, id, RetireReason::Done);
                    }
                    Action::Collected(record) => sim.record(EventKind::Collect {
                        cell: id,
                        node: record.node,
                        occupancy: record.occupancy as u64,
                    }),
                    Action::Flush(batch) => {
                        let roles_admin = self.roles.admin.clone();
                        let sub = self.seal_to(Topic::Status, &StatusRecord::encode_batch(&batch), &roles_admin, here);
                        let to = self.admin.location;
                        self.send(sim, sub, here, to, None);
                    }
                }
            }
        }
    }

    fn declare(&mut self, sim: &mut SimState) {
        let mut present: BTreeMap<NodeId, u32> = BTreeMap::new();
        let mut first_ant: BTreeMap<NodeId, CellId> = BTreeMap::new();
        for cell in self.cells.iter().filter(|c| c.kind() == CellKind::Ant) {
            *present.entry(cell.location).or_default() += 1;
            first_ant.entry(cell.location).or_insert(cell.id);
        }
        let a = self.params.agnosco;
        for node in agnosco_declare(&self.pheromone, &present, a.quorum, a.threshold) {
            if !self.latched.insert(node) {
                continue;
            }
            sim.record(EventKind::Identify {
                node,
                cell: first_ant[&node],
            });
            let report = InfectionReport {
                node,
                signature: self.hints.get(&node).cloned().unwrap_or_default(),
            };
            let lymph_role = self.roles.lymph.clone();
            let sub = self.seal_to(Topic::Report, &report.encode(), &lymph_role, node);
            if let Some((station, at)) = self.directory.nearest(node, sim.routing()) {
                self.send(sim, sub, node, at, Some(station));
            }
        }
        let rearm = a.threshold / 2.0;
        let pheromone = &self.pheromone;
        self.latched.retain(|&n| pheromone.outgoing_mass(n) >= rearm);
    }

    fn run_lymph(&mut self, sim: &mut SimState, idx: usize) {
        let inbox = std::mem::take(&mut self.lymph[idx].inbox);
        let here = self.lymph[idx].location;
        let station = self.lymph[idx].id;
        for sub in inbox {
            let substance = sub.id;
            let topic = sub.topic;
            match lymph_route(&self.lymph[idx], sub, &self.directory, sim.routing()) {
                RouteAction::Open(payload) => {
                    sim.record(EventKind::SubstanceOpen {
                        substance,
                        node: here,
                        by: Holder::Station(station),
                    });
                    if topic != Topic::Report {
                        continue;
                    }
                    let Some(report) = InfectionReport::decode(&payload) else {
                        continue;
                    };
                    let action = lymph_on_report(&mut self.lymph[idx], &report, sim.clock(), self.dedupe);
                    if let Some(target) = action.disinfect {
                        let cell = self.spawn(sim, here, CellState::Disinfector { target }, Some(station));
                        self.lymph[idx].known_cells.insert(cell);
                        self.dispatched.insert(cell, station);
                    }
                    if let Some(signature) = action.immunize {
                        self.immunize(sim, report.node, &signature, here);
                    }
                }
                RouteAction::Forward { to, node, substance } => self.send(sim, substance, here, node, Some(to)),
                RouteAction::Drop => sim.record(EventKind::SubstanceDrop { substance, node: here }),
            }
        }
    }

    /// Push `signature` to detectors within the immunization radius of
    /// `around`, and feed it to every CNTS.
    fn immunize(&mut self, sim: &mut SimState, around: NodeId, signature: &[u8], here: NodeId) {
        let detector_role = self.roles.detector.clone();
        let sub = self.seal_to(Topic::Immunize, signature, &detector_role, here);
        sim.record(EventKind::SubstanceSend {
            substance: sub.id,
            topic: sub.topic,
            origin: here,
            dst: None,
        });
        let dist = sim.network().bfs_distances(around);
        for id in self.cells.ids_of(CellKind::Detector) {
            let cell = self.cells.get_mut(id).expect("listed");
            if dist[cell.location.index()].is_some_and(|d| d <= self.radius) {
                cell.inbox.push(sub.clone());
            }
        }
        let cnts_role = self.roles.cnts.clone();
        for i in 0..self.cnts.len() {
            let feed = self.seal_to(Topic::Feed, signature, &cnts_role, here);
            let (id, at) = (self.cnts[i].id, self.cnts[i].location);
            self.send(sim, feed, here, at, Some(id));
        }
    }

    fn run_cnts(&mut self, sim: &mut SimState, idx: usize) {
        let inbox = std::mem::take(&mut self.cnts[idx].inbox);
        let (station, here) = (self.cnts[idx].id, self.cnts[idx].location);
        for sub in inbox {
            match try_open(&sub, &self.cnts[idx].receptors) {
                Some(signature) => {
                    sim.record(EventKind::SubstanceOpen {
                        substance: sub.id,
                        node: here,
                        by: Holder::Station(station),
                    });
                    if sub.topic == Topic::Feed && !signature.is_empty() {
                        self.cnts[idx].learn(&signature);
                    }
                }
                None => sim.record(EventKind::SubstanceDrop {
                    substance: sub.id,
                    node: here,
                }),
            }
        }
        let trained = self.cnts[idx].trained.clone();
        for kind in cnts_release(&self.cnts[idx], sim.clock()) {
            if kind == CellKind::Disinfector {
                continue;
            }
            let state = self.fresh_state(kind, &trained);
            self.spawn(sim, here, state, Some(station));
            if let Some(&cap) = self.caps.get(&kind) {
                let ids = self.cells.ids_of(kind);
                let excess = ids.len().saturating_sub(cap as usize);
                for &old in &ids[..excess] {
                    self.retire(sim, old, RetireReason::Replaced);
                }
            }
        }
    }
}

impl StepHandlers for World {
    fn inject(&mut self, sim: &mut SimState) {
        for p in self.gate.reset() {
            sim.inject(p).expect("generated on valid nodes");
        }
        let clock = sim.clock();
        let due: Vec<(usize, NodeId)> = self
            .entries
            .iter()
            .filter(|e| e.step == clock)
            .map(|e| (e.attack, e.node))
            .collect();
        for (attack, node) in due {
            if let Some(ev) = spawn_worm(&mut self.health, &self.attacks[attack], node, clock).expect("valid entry") {
                sim.record(ev);
            }
        }
        let background = inject_background(
            sim.network(),
            &mut self.background,
            self.payload_len,
            &self.signatures,
            &mut self.rng_traffic,
        );
        for p in background {
            self.inject_gated(sim, p);
        }
        let n = sim.network().node_count();
        for i in 0..self.attacks.len() {
            let count = self.attack_rates[i].draw(&mut self.rng_worm);
            for _ in 0..count {
                let (src, dst) = random_pair(n, &mut self.rng_worm);
                let payload = attack_payload(&self.attacks[i], self.payload_len, &mut self.rng_worm);
                self.inject_gated(sim, Packet::data(src, dst, payload, Some(self.attacks[i].id)));
            }
        }
    }

    fn departed(&mut self, _sim: &mut SimState, packet: &Packet, from: NodeId, _to: NodeId) {
        let Cargo::Cell(id) = packet.cargo else {
            return;
        };
        let component = ComponentId::Cell(id);
        if self.defense.location(component) == Some(from) {
            self.defense.deregister(from, component).expect("registered");
        }
    }

    fn check(&mut self, sim: &mut SimState, node: NodeId, from: NodeId, packet: &Packet) -> Verdict {
        let cells = &self.cells;
        let verdict = self
            .defense
            .check_all(node, packet, |c| cells.get(c).and_then(|c| c.db()));
        if let Verdict::Destroyed {
            signature: Some(sig), ..
        } = &verdict
        {
            self.pheromone.deposit(&DetectionEvent {
                step: sim.clock(),
                node,
                arrival_edge: (from, node),
                signature: sig.clone(),
                packet_src: packet.src,
            });
            self.hints.insert(from, sig.clone());
        }
        verdict
    }

    fn forwarded(&mut self, sim: &mut SimState, packet: &Packet, from: NodeId, to: NodeId) {
        if let Cargo::Cell(id) = packet.cargo {
            if let Some(cell) = self.cells.get_mut(id) {
                cell.location = to;
                sim.record(EventKind::CellMove { cell: id, from, to });
            }
        }
    }

    fn delivered(&mut self, sim: &mut SimState, packet: Packet, from: NodeId) {
        let node = packet.dst;
        match packet.cargo {
            Cargo::Data => {
                let Some(attack) = packet.attack.and_then(|a| self.attack_index(a)) else {
                    return;
                };
                let clock = sim.clock();
                if let Some(ev) =
                    on_attack_delivery(&mut self.health[node.index()], &self.attacks[attack], node, &packet, clock)
                {
                    sim.record(ev);
                }
            }
            Cargo::Cell(id) => self.cell_arrived(sim, id, from, node),
            Cargo::Substance(sub) => self.deliver_substance(sim, *sub, node),
        }
    }

    fn lost(&mut self, sim: &mut SimState, packet: Packet) {
        if let Cargo::Cell(id) = packet.cargo {
            self.retire(sim, id, RetireReason::Lost);
        }
    }

    fn emit(&mut self, sim: &mut SimState) {
        for node in 0..self.health.len() {
            let Some(attack) = self.health[node].infected_by.and_then(|a| self.attack_index(a)) else {
                continue;
            };
            let packets = worm_emit(
                sim.network(),
                &self.health[node],
                NodeId(node as u32),
                &self.attacks[attack],
                self.payload_len,
                &mut self.rng_worm,
            );
            for p in packets {
                self.inject_gated(sim, p);
            }
        }
    }

    fn act(&mut self, sim: &mut SimState) {
        self.open_detector_inboxes(sim);
        self.run_cells(sim);
        self.declare(sim);
    }

    fn evaporate(&mut self, _sim: &mut SimState) {
        self.pheromone.evaporate();
    }

    fn stations(&mut self, sim: &mut SimState) {
        // Lymph node ids precede CNTS ids.
        for i in 0..self.lymph.len() {
            self.run_lymph(sim, i);
        }
        for i in 0..self.cnts.len() {
            self.run_cnts(sim, i);
        }
    }

    fn infected_count(&self) -> u64 {
        self.health.iter().filter(|h| h.is_infected()).count() as u64
    }
}
