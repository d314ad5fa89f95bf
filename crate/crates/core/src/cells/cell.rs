use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pheromone::{agnosco_move, AgnoscoParams, PheromoneMap};
use super::signature_db::CompressedSignatureDb;
use crate::adversary::NodeHealth;
use crate::comms::{PrivateReceptor, Substance};
use crate::ids::{CellId, NodeId, TimeStep};
use crate::packet::{Packet, TrafficClass};
use crate::topology::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Detector,
    Ant,
    Monitor,
    Disinfector,
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Detector => "detector",
            CellKind::Ant => "ant",
            CellKind::Monitor => "monitor",
            CellKind::Disinfector => "disinfector",
        })
    }
}

impl FromStr for CellKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "detector" => Ok(CellKind::Detector),
            "ant" => Ok(CellKind::Ant),
            "monitor" => Ok(CellKind::Monitor),
            "disinfector" => Ok(CellKind::Disinfector),
            _ => Err(format!("unknown cell kind `{s}`")),
        }
    }
}

/// One monitor observation. Monitors never see infection state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatusRecord {
    pub step: TimeStep,
    pub node: NodeId,
    pub occupancy: u32,
    pub pheromone: f64,
}

impl StatusRecord {
    const WIDTH: usize = 24;

    pub fn encode_batch(records: &[StatusRecord]) -> Vec<u8> {
        let mut out = Vec::with_capacity(records.len() * Self::WIDTH);
        for r in records {
            out.extend_from_slice(&r.step.to_le_bytes());
            out.extend_from_slice(&r.node.0.to_le_bytes());
            out.extend_from_slice(&r.occupancy.to_le_bytes());
            out.extend_from_slice(&r.pheromone.to_le_bytes());
        }
        out
    }

    pub fn decode_batch(bytes: &[u8]) -> Option<Vec<StatusRecord>> {
        if bytes.len() % Self::WIDTH != 0 {
            return None;
        }
        bytes
            .chunks(Self::WIDTH)
            .map(|c| {
                Some(StatusRecord {
                    step: u64::from_le_bytes(c[0..8].try_into().ok()?),
                    node: NodeId(u32::from_le_bytes(c[8..12].try_into().ok()?)),
                    occupancy: u32::from_le_bytes(c[12..16].try_into().ok()?),
                    pheromone: f64::from_le_bytes(c[16..24].try_into().ok()?),
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellState {
    Detector { db: CompressedSignatureDb },
    Ant { memory: VecDeque<NodeId> },
    Monitor { buffer: Vec<StatusRecord>, flush_every: usize },
    Disinfector { target: NodeId },
}

impl CellState {
    pub fn kind(&self) -> CellKind {
        match self {
            CellState::Detector { .. } => CellKind::Detector,
            CellState::Ant { .. } => CellKind::Ant,
            CellState::Monitor { .. } => CellKind::Monitor,
            CellState::Disinfector { .. } => CellKind::Disinfector,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ArtificialCell {
    pub id: CellId,
    pub location: NodeId,
    pub receptors: Vec<PrivateReceptor>,
    pub state: CellState,
    /// Set while the cell's transport packet is queued or travelling.
    pub in_transit: bool,
    pub inbox: Vec<Substance>,
    pub born: TimeStep,
}

impl ArtificialCell {
    pub fn kind(&self) -> CellKind {
        self.state.kind()
    }

    pub fn db(&self) -> Option<&CompressedSignatureDb> {
        match &self.state {
            CellState::Detector { db } => Some(db),
            _ => None,
        }
    }
}

/// What a node looks like to a cell standing on it.
pub struct NodeContext<'a> {
    pub network: &'a Network,
    pub pheromone: &'a PheromoneMap,
    pub clock: TimeStep,
    pub occupancy: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellParams {
    /// Per-step probability that a detector or monitor moves on.
    pub p_move: f64,
    pub agnosco: AgnoscoParams,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    /// Leave for `dst` as an immune packet (one hop per step).
    Travel(NodeId),
    Disinfect(NodeId),
    Collected(StatusRecord),
    /// Monitor buffer is full; ship it to the administrator.
    Flush(Vec<StatusRecord>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnimaVerdict {
    /// Carries the payload window that matched.
    Malicious(Vec<u8>),
    Clean,
}

/// Detector payload check. Immune-class packets carry sealed or cell
/// cargo and are not inspected.
pub fn anima_check(db: &CompressedSignatureDb, packet: &Packet) -> AnimaVerdict {
    if packet.class == TrafficClass::Immune {
        return AnimaVerdict::Clean;
    }
    match db.scan(&packet.payload) {
        Some(window) => AnimaVerdict::Malicious(window.to_vec()),
        None => AnimaVerdict::Clean,
    }
}

pub fn monitor_collect(cell: &mut ArtificialCell, ctx: &NodeContext<'_>) -> (StatusRecord, Option<Vec<StatusRecord>>) {
    let record = StatusRecord {
        step: ctx.clock,
        node: cell.location,
        occupancy: ctx.occupancy as u32,
        pheromone: ctx.pheromone.outgoing_mass(cell.location),
    };
    let CellState::Monitor { buffer, flush_every } = &mut cell.state else {
        panic!("monitor_collect on a {} cell", cell.kind());
    };
    buffer.push(record);
    let flushed = (buffer.len() >= (*flush_every).max(1)).then(|| std::mem::take(buffer));
    (record, flushed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisinfectOutcome {
    Disinfected,
    /// Target was not infected; nothing changed.
    FalsePositive,
}

pub fn disinfect_apply(health: &mut NodeHealth) -> DisinfectOutcome {
    if health.infected_by.take().is_some() {
        health.infected_at = None;
        DisinfectOutcome::Disinfected
    } else {
        DisinfectOutcome::FalsePositive
    }
}

fn random_neighbor<R: Rng + ?Sized>(network: &Network, here: NodeId, rng: &mut R) -> Option<NodeId> {
    let neighbors: Vec<NodeId> = network.neighbors(here).collect();
    neighbors.choose(rng).copied()
}

/// `here` sends out at least half the declaration threshold and at least
/// as much as its strongest incoming edge.
pub fn trail_source(ctx: &NodeContext<'_>, here: NodeId, threshold: f64) -> bool {
    let out = ctx.pheromone.outgoing_mass(here);
    out >= threshold / 2.0
        && ctx
            .network
            .neighbors(here)
            .all(|v| ctx.pheromone.level(v, here) <= out)
}

/// One step of a resident cell's behaviour. Detectors have already
/// inspected arriving packets through their defense-stack registration.
pub fn cell_step<R: Rng + ?Sized>(
    cell: &mut ArtificialCell,
    ctx: &NodeContext<'_>,
    params: &CellParams,
    rng: &mut R,
) -> Vec<Action> {
    let here = cell.location;
    match cell.kind() {
        CellKind::Detector => {
            if params.p_move > 0.0 && rng.random::<f64>() < params.p_move {
                random_neighbor(ctx.network, here, rng).map(Action::Travel).into_iter().collect()
            } else {
                Vec::new()
            }
        }
        CellKind::Ant => {
            // Hold position at a local source of the trail so a quorum can
            // form; the trail is wiped once a disinfector has been there.
            if trail_source(ctx, here, params.agnosco.threshold) {
                return Vec::new();
            }
            let CellState::Ant { memory } = &mut cell.state else {
                unreachable!()
            };
            let next = agnosco_move(here, memory, ctx.network, ctx.pheromone, &params.agnosco, rng);
            memory.push_back(here);
            while memory.len() > params.agnosco.memory {
                memory.pop_front();
            }
            vec![Action::Travel(next)]
        }
        CellKind::Monitor => {
            let (record, flushed) = monitor_collect(cell, ctx);
            let mut actions = vec![Action::Collected(record)];
            actions.extend(flushed.map(Action::Flush));
            if params.p_move > 0.0 && rng.random::<f64>() < params.p_move {
                actions.extend(random_neighbor(ctx.network, here, rng).map(Action::Travel));
            }
            actions
        }
        CellKind::Disinfector => {
            let CellState::Disinfector { target } = cell.state else {
                unreachable!()
            };
            if here == target {
                vec![Action::Disinfect(target)]
            } else {
                vec![Action::Travel(target)]
            }
        }
    }
}

/// Cells keyed by id. Mutation during a pass goes through the caller's
/// deferred spawn/retire lists; iterate over [`CellPopulation::ids`].
#[derive(Clone, Debug, Default)]
pub struct CellPopulation {
    cells: BTreeMap<CellId, ArtificialCell>,
    next_id: u64,
}

impl CellPopulation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        location: NodeId,
        state: CellState,
        receptors: Vec<PrivateReceptor>,
        born: TimeStep,
    ) -> CellId {
        let id = CellId(self.next_id);
        self.next_id += 1;
        self.cells.insert(
            id,
            ArtificialCell {
                id,
                location,
                receptors,
                state,
                in_transit: false,
                inbox: Vec::new(),
                born,
            },
        );
        id
    }

    pub fn remove(&mut self, id: CellId) -> Option<ArtificialCell> {
        self.cells.remove(&id)
    }

    pub fn get(&self, id: CellId) -> Option<&ArtificialCell> {
        self.cells.get(&id)
    }

    pub fn get_mut(&mut self, id: CellId) -> Option<&mut ArtificialCell> {
        self.cells.get_mut(&id)
    }

    pub fn ids(&self) -> Vec<CellId> {
        self.cells.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ArtificialCell> {
        self.cells.values()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.cells.values().filter(|c| c.kind() == kind).count()
    }

    /// Ids of `kind`, oldest first.
    pub fn ids_of(&self, kind: CellKind) -> Vec<CellId> {
        self.cells.values().filter(|c| c.kind() == kind).map(|c| c.id).collect()
    }
}
