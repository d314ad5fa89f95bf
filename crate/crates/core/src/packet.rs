use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::comms::Substance;
use crate::ids::{AttackId, CellId, NodeId, PacketId, TimeStep};

/// QoS class. Immune traffic (cell transport and substances) is always
/// served before data traffic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrafficClass {
    Immune,
    Data,
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrafficClass::Immune => "immune",
            TrafficClass::Data => "data",
        })
    }
}

impl FromStr for TrafficClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "immune" => Ok(TrafficClass::Immune),
            "data" => Ok(TrafficClass::Data),
            other => Err(format!("unknown traffic class `{other}`")),
        }
    }
}

/// What a packet carries besides its raw payload.
#[derive(Clone, Debug, PartialEq)]
pub enum Cargo {
    Data,
    /// An artificial cell moving between nodes.
    Cell(CellId),
    Substance(Box<Substance>),
}

impl Cargo {
    pub fn class(&self) -> TrafficClass {
        match self {
            Cargo::Data => TrafficClass::Data,
            Cargo::Cell(_) | Cargo::Substance(_) => TrafficClass::Immune,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub id: PacketId,
    pub src: NodeId,
    pub dst: NodeId,
    pub class: TrafficClass,
    pub payload: Vec<u8>,
    pub attack: Option<AttackId>,
    pub hop_count: u32,
    pub injected_at: TimeStep,
    pub cargo: Cargo,
}

impl Packet {
    /// A packet that has not been assigned an id yet; the transport stamps
    /// `id` and `injected_at` on injection.
    pub fn data(src: NodeId, dst: NodeId, payload: Vec<u8>, attack: Option<AttackId>) -> Self {
        Packet {
            id: PacketId(0),
            src,
            dst,
            class: TrafficClass::Data,
            payload,
            attack,
            hop_count: 0,
            injected_at: 0,
            cargo: Cargo::Data,
        }
    }

    pub fn immune(src: NodeId, dst: NodeId, cargo: Cargo) -> Self {
        debug_assert!(cargo.class() == TrafficClass::Immune);
        Packet {
            id: PacketId(0),
            src,
            dst,
            class: TrafficClass::Immune,
            payload: Vec::new(),
            attack: None,
            hop_count: 0,
            injected_at: 0,
            cargo,
        }
    }
}
