//! Per-node security framework: header filters, static IDS and visiting
//! detector cells, consulted in ascending component id on every arrival.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cells::{anima_check, AnimaVerdict, CompressedSignatureDb};
use crate::error::SimError;
use crate::ids::{CellId, NodeId};
use crate::packet::{Packet, TrafficClass};
use crate::transport::Verdict;

/// Filters sort before IDS, IDS before cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ComponentId {
    Filter(u32),
    Ids(u32),
    Cell(CellId),
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentId::Filter(n) => write!(f, "filter:{n}"),
            ComponentId::Ids(n) => write!(f, "ids:{n}"),
            ComponentId::Cell(c) => write!(f, "cell:{c}"),
        }
    }
}

impl FromStr for ComponentId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, n) = s.split_once(':').ok_or_else(|| format!("bad component id `{s}`"))?;
        let bad = |_| format!("bad component id `{s}`");
        match kind {
            "filter" => n.parse().map(ComponentId::Filter).map_err(bad),
            "ids" => n.parse().map(ComponentId::Ids).map_err(bad),
            "cell" => n.parse().map(|c| ComponentId::Cell(CellId(c))).map_err(bad),
            _ => Err(format!("bad component id `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterAction {
    Drop,
    Accept,
}

/// Header-only match. Absent fields match anything.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<BTreeSet<NodeId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst: Option<BTreeSet<NodeId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<TrafficClass>,
    pub action: FilterAction,
}

impl FilterRule {
    pub fn matches(&self, packet: &Packet) -> bool {
        self.src.as_ref().is_none_or(|s| s.contains(&packet.src))
            && self.dst.as_ref().is_none_or(|d| d.contains(&packet.dst))
            && self.class.is_none_or(|c| c == packet.class)
    }
}

/// First matching rule wins; no match accepts.
pub fn filter_check(rules: &[FilterRule], packet: &Packet) -> FilterAction {
    rules
        .iter()
        .find(|r| r.matches(packet))
        .map_or(FilterAction::Accept, |r| r.action)
}

/// Plain substring matcher over an uncompressed signature set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExactMatcher {
    signatures: Vec<Vec<u8>>,
}

impl ExactMatcher {
    pub fn new(signatures: impl IntoIterator<Item = Vec<u8>>) -> Self {
        let mut signatures: Vec<Vec<u8>> = signatures.into_iter().filter(|s| !s.is_empty()).collect();
        signatures.sort();
        signatures.dedup();
        ExactMatcher { signatures }
    }

    pub fn signatures(&self) -> &[Vec<u8>] {
        &self.signatures
    }

    /// The first signature (in sorted order) occurring in `payload`.
    pub fn find(&self, payload: &[u8]) -> Option<&[u8]> {
        self.signatures
            .iter()
            .find(|s| s.len() <= payload.len() && payload.windows(s.len()).any(|w| w == s.as_slice()))
            .map(Vec::as_slice)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaticIds {
    pub placement: NodeId,
    pub matcher: ExactMatcher,
}

/// Exact signature scan. Immune-class packets are not inspected.
pub fn ids_check(ids: &StaticIds, packet: &Packet) -> Option<Vec<u8>> {
    if packet.class == TrafficClass::Immune {
        return None;
    }
    ids.matcher.find(&packet.payload).map(<[u8]>::to_vec)
}

#[derive(Clone, Debug)]
enum Component {
    Filter(Vec<FilterRule>),
    Ids(StaticIds),
    /// Detector cell; its signature store lives with the cell population.
    Cell,
}

#[derive(Clone, Debug)]
pub struct DefenseStack {
    nodes: Vec<BTreeMap<ComponentId, Component>>,
    located: BTreeMap<ComponentId, NodeId>,
}

impl DefenseStack {
    pub fn new(node_count: usize) -> Self {
        DefenseStack {
            nodes: vec![BTreeMap::new(); node_count],
            located: BTreeMap::new(),
        }
    }

    fn insert(&mut self, node: NodeId, id: ComponentId, c: Component) -> Result<(), SimError> {
        if node.index() >= self.nodes.len() {
            return Err(SimError::UnknownNode(node));
        }
        if self.located.contains_key(&id) {
            return Err(SimError::DuplicateRegistration(id.to_string()));
        }
        self.nodes[node.index()].insert(id, c);
        self.located.insert(id, node);
        Ok(())
    }

    pub fn register_filter(&mut self, node: NodeId, id: u32, rules: Vec<FilterRule>) -> Result<(), SimError> {
        self.insert(node, ComponentId::Filter(id), Component::Filter(rules))
    }

    pub fn register_ids(&mut self, id: u32, ids: StaticIds) -> Result<(), SimError> {
        self.insert(ids.placement, ComponentId::Ids(id), Component::Ids(ids))
    }

    pub fn register_cell(&mut self, node: NodeId, cell: CellId) -> Result<(), SimError> {
        self.insert(node, ComponentId::Cell(cell), Component::Cell)
    }

    pub fn deregister(&mut self, node: NodeId, id: ComponentId) -> Result<(), SimError> {
        if node.index() >= self.nodes.len() {
            return Err(SimError::UnknownNode(node));
        }
        if self.located.get(&id) != Some(&node) {
            return Err(SimError::NotRegistered(id.to_string()));
        }
        self.nodes[node.index()].remove(&id);
        self.located.remove(&id);
        Ok(())
    }

    pub fn location(&self, id: ComponentId) -> Option<NodeId> {
        self.located.get(&id).copied()
    }

    /// Registered components at `node`, ascending.
    pub fn components(&self, node: NodeId) -> Vec<ComponentId> {
        self.nodes
            .get(node.index())
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    /// Consult every component at `node` in order; the first hit destroys
    /// the packet. `db` resolves a detector cell to its signature store.
    pub fn check_all<'a>(
        &self,
        node: NodeId,
        packet: &Packet,
        db: impl Fn(CellId) -> Option<&'a CompressedSignatureDb>,
    ) -> Verdict {
        let Some(components) = self.nodes.get(node.index()) else {
            return Verdict::Pass;
        };
        for (&id, c) in components {
            let hit = match c {
                Component::Filter(rules) => match filter_check(rules, packet) {
                    FilterAction::Drop => Some(None),
                    FilterAction::Accept => None,
                },
                Component::Ids(ids) => ids_check(ids, packet).map(Some),
                Component::Cell => {
                    let ComponentId::Cell(cell) = id else { unreachable!() };
                    match db(cell).map(|db| anima_check(db, packet)) {
                        Some(AnimaVerdict::Malicious(sig)) => Some(Some(sig)),
                        _ => None,
                    }
                }
            };
            if let Some(signature) = hit {
                return Verdict::Destroyed { by: id, signature };
            }
        }
        Verdict::Pass
    }
}
