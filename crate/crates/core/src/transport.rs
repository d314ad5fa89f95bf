//! Synchronous packet transport: bounded two-lane queues, precomputed
//! routes, and the fixed per-step phase order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::defense::ComponentId;
use crate::error::SimError;
use crate::event::{EventKind, EventLog};
use crate::ids::{NodeId, PacketId, TimeStep};
use crate::packet::{Cargo, Packet, TrafficClass};
use crate::queue::{EnqueueOutcome, NodeQueue};
use crate::routing::RoutingTable;
use crate::topology::Network;

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pass,
    Destroyed {
        by: ComponentId,
        /// Matched signature window for content hits; `None` for header filters.
        signature: Option<Vec<u8>>,
    },
}

/// Callbacks invoked by [`SimState::step`], in this order:
///
/// 1. `inject`
/// 2. forwarding: per node ascending, immune lane before data lane, bounded
///    by each outgoing link's bandwidth (`departed` per packet)
/// 3. per arrival: `check`; survivors are `delivered` or `forwarded`
/// 4. `emit`
/// 5. `act`
/// 6. `evaporate`
/// 7. `stations`
/// 8. `sample`, then a `Step` marker is logged and the clock advances.
#[allow(unused_variables)]
pub trait StepHandlers {
    fn inject(&mut self, sim: &mut SimState) {}
    fn departed(&mut self, sim: &mut SimState, packet: &Packet, from: NodeId, to: NodeId) {}
    fn check(&mut self, sim: &mut SimState, node: NodeId, from: NodeId, packet: &Packet) -> Verdict {
        Verdict::Pass
    }
    fn forwarded(&mut self, sim: &mut SimState, packet: &Packet, from: NodeId, to: NodeId) {}
    fn delivered(&mut self, sim: &mut SimState, packet: Packet, from: NodeId) {}
    /// Packet left the network without delivery: overflow, eviction or detection.
    fn lost(&mut self, sim: &mut SimState, packet: Packet) {}
    fn emit(&mut self, sim: &mut SimState) {}
    fn act(&mut self, sim: &mut SimState) {}
    fn evaporate(&mut self, sim: &mut SimState) {}
    fn stations(&mut self, sim: &mut SimState) {}
    fn sample(&mut self, sim: &mut SimState) {}
    /// Number of currently infected nodes, reported in the step marker.
    fn infected_count(&self) -> u64 {
        0
    }
}

/// Transport with no security components or traffic sources.
pub struct NoHandlers;

impl StepHandlers for NoHandlers {}

#[derive(Clone, Debug)]
pub struct SimState {
    clock: TimeStep,
    network: Network,
    routing: RoutingTable,
    queues: Vec<NodeQueue>,
    rng: ChaCha8Rng,
    log: EventLog,
    next_packet: u64,
}

struct Departure {
    from: NodeId,
    to: NodeId,
    packet: Packet,
}

impl SimState {
    pub fn new(network: Network, capacity: usize, seed: u64) -> Self {
        let routing = RoutingTable::compute(&network);
        let queues = vec![NodeQueue::new(capacity); network.node_count()];
        SimState {
            clock: 0,
            network,
            routing,
            queues,
            rng: ChaCha8Rng::seed_from_u64(seed),
            log: EventLog::new(),
            next_packet: 0,
        }
    }

    pub fn clock(&self) -> TimeStep {
        self.clock
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn routing(&self) -> &RoutingTable {
        &self.routing
    }

    pub fn queue(&self, node: NodeId) -> &NodeQueue {
        &self.queues[node.index()]
    }

    pub fn queued_total(&self) -> usize {
        self.queues.iter().map(NodeQueue::len).sum()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn record(&mut self, kind: EventKind) {
        self.log.push(self.clock, kind);
    }

    fn check_node(&self, node: NodeId) -> Result<(), SimError> {
        if self.network.contains(node) {
            Ok(())
        } else {
            Err(SimError::UnknownNode(node))
        }
    }

    /// Offer `packet` to `node`'s queue, logging any drop or eviction.
    /// `from` is the upstream node for arrivals, `None` for injections.
    pub fn enqueue(
        &mut self,
        node: NodeId,
        packet: Packet,
        from: Option<NodeId>,
    ) -> Result<EnqueueOutcome, SimError> {
        self.check_node(node)?;
        let outcome = self.queues[node.index()].enqueue(packet);
        match &outcome {
            EnqueueOutcome::Accepted => {}
            EnqueueOutcome::Dropped(p) => self.record(EventKind::Drop {
                packet: p.id,
                node,
                from,
            }),
            EnqueueOutcome::Evicted(p) => self.record(EventKind::Evict { packet: p.id, node }),
        }
        Ok(outcome)
    }

    /// Stamp a fresh id on `packet`, log the injection and queue it at its source.
    pub fn inject(&mut self, mut packet: Packet) -> Result<(PacketId, EnqueueOutcome), SimError> {
        self.check_node(packet.src)?;
        self.check_node(packet.dst)?;
        packet.id = PacketId(self.next_packet);
        self.next_packet += 1;
        packet.injected_at = self.clock;
        packet.class = packet.cargo.class();
        let (cell, substance) = match &packet.cargo {
            Cargo::Data => (None, None),
            Cargo::Cell(c) => (Some(*c), None),
            Cargo::Substance(s) => (None, Some(s.id)),
        };
        self.record(EventKind::Inject {
            packet: packet.id,
            class: packet.class,
            src: packet.src,
            dst: packet.dst,
            attack: packet.attack,
            cell,
            substance,
        });
        let id = packet.id;
        let src = packet.src;
        Ok((id, self.enqueue(src, packet, None)?))
    }

    /// Pull up to one link's bandwidth worth of packets per outgoing link.
    /// Stops at the first packet whose link budget is spent, which keeps
    /// both lanes FIFO and the immune lane strictly ahead of data.
    fn drain_node(&mut self, node: NodeId, out: &mut Vec<Departure>) {
        let adjacent = self.network.adjacent(node);
        let mut budget: Vec<u32> = adjacent
            .iter()
            .map(|&(_, link)| self.network.link(link).bandwidth)
            .collect();
        loop {
            let Some(head) = self.queues[node.index()].peek() else {
                break;
            };
            let hop = self.routing.next_hop(node, head.dst).unwrap_or(node);
            if hop != node {
                let slot = adjacent
                    .iter()
                    .position(|&(n, _)| n == hop)
                    .expect("next hop is a neighbor");
                if budget[slot] == 0 {
                    break;
                }
                budget[slot] -= 1;
            }
            let packet = self.queues[node.index()].dequeue().unwrap();
            out.push(Departure {
                from: node,
                to: hop,
                packet,
            });
        }
    }

    pub fn step<H: StepHandlers + ?Sized>(&mut self, handlers: &mut H) {
        handlers.inject(self);

        let mut departures = Vec::new();
        for node in 0..self.network.node_count() as u32 {
            self.drain_node(NodeId(node), &mut departures);
        }
        for d in &departures {
            handlers.departed(self, &d.packet, d.from, d.to);
        }

        for Departure { from, to, mut packet } in departures {
            packet.hop_count += 1;
            match handlers.check(self, to, from, &packet) {
                Verdict::Destroyed { by, signature } => {
                    self.record(EventKind::Detect {
                        packet: packet.id,
                        node: to,
                        from,
                        by,
                        signature,
                    });
                    handlers.lost(self, packet);
                }
                Verdict::Pass if packet.dst == to => {
                    self.record(EventKind::Deliver {
                        packet: packet.id,
                        from,
                        node: to,
                    });
                    handlers.delivered(self, packet, from);
                }
                Verdict::Pass => {
                    self.record(EventKind::Forward {
                        packet: packet.id,
                        from,
                        to,
                    });
                    handlers.forwarded(self, &packet, from, to);
                    match self.enqueue(to, packet, Some(from)).expect("neighbor exists") {
                        EnqueueOutcome::Accepted => {}
                        EnqueueOutcome::Dropped(p) | EnqueueOutcome::Evicted(p) => handlers.lost(self, p),
                    }
                }
            }
        }

        handlers.emit(self);
        handlers.act(self);
        handlers.evaporate(self);
        handlers.stations(self);
        handlers.sample(self);
        let queued = self.queued_total() as u64;
        let infected = handlers.infected_count();
        self.record(EventKind::Step { queued, infected });
        self.clock += 1;
    }

    /// Log the in-flight census that closes a run.
    pub fn finish(&mut self) {
        let mut data = 0;
        let mut immune = 0;
        for q in &self.queues {
            data += q.lane_len(TrafficClass::Data) as u64;
            immune += q.lane_len(TrafficClass::Immune) as u64;
        }
        self.record(EventKind::End { data, immune });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologySpec;

    fn line3() -> SimState {
        let net = TopologySpec::Line {
            nodes: 3,
            bandwidth: 4,
        }
        .build(&mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
        SimState::new(net, 32, 1)
    }

    #[test]
    fn empty_network_only_logs_step_markers() {
        let mut sim = line3();
        for _ in 0..10 {
            sim.step(&mut NoHandlers);
        }
        assert_eq!(sim.clock(), 10);
        assert_eq!(sim.log().len(), 10);
        assert!(sim
            .log()
            .iter()
            .all(|e| matches!(e.kind, EventKind::Step { queued: 0, infected: 0 })));
    }

    #[test]
    fn one_hop_per_step() {
        let mut sim = line3();
        sim.inject(Packet::data(NodeId(0), NodeId(2), vec![1, 2, 3], None))
            .unwrap();
        sim.step(&mut NoHandlers);
        assert!(sim
            .log()
            .iter()
            .any(|e| e.step == 0 && matches!(e.kind, EventKind::Forward { to: NodeId(1), .. })));
        sim.step(&mut NoHandlers);
        assert!(sim
            .log()
            .iter()
            .any(|e| e.step == 1 && matches!(e.kind, EventKind::Deliver { node: NodeId(2), .. })));
        assert_eq!(sim.queued_total(), 0);
    }

    #[test]
    fn unknown_node_is_an_error() {
        let mut sim = line3();
        let p = Packet::data(NodeId(0), NodeId(9), vec![], None);
        assert_eq!(sim.inject(p).unwrap_err(), SimError::UnknownNode(NodeId(9)));
    }

    #[test]
    fn bandwidth_limits_forwarding() {
        let net = TopologySpec::Line {
            nodes: 2,
            bandwidth: 2,
        }
        .build(&mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
        let mut sim = SimState::new(net, 32, 1);
        for _ in 0..5 {
            sim.inject(Packet::data(NodeId(0), NodeId(1), vec![], None)).unwrap();
        }
        sim.step(&mut NoHandlers);
        assert_eq!(sim.queue(NodeId(0)).len(), 3);
        sim.step(&mut NoHandlers);
        sim.step(&mut NoHandlers);
        assert_eq!(sim.queued_total(), 0);
    }
}
