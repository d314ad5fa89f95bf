use std::collections::{BTreeSet, HashMap};

use super::receptor::PrivateReceptor;
use super::substance::{try_open, Substance};
use crate::cells::CellKind;
use crate::ids::{CellId, NodeId, StationId, TimeStep};
use crate::routing::RoutingTable;

/// Payload of an AGNOSCO infection report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfectionReport {
    pub node: NodeId,
    /// Last signature detected on traffic leaving `node`; empty if unknown.
    pub signature: Vec<u8>,
}

impl InfectionReport {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.node.0.to_le_bytes().to_vec();
        out.extend_from_slice(&self.signature);
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let node = u32::from_le_bytes(bytes.get(..4)?.try_into().ok()?);
        Some(InfectionReport {
            node: NodeId(node),
            signature: bytes[4..].to_vec(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct LymphNode {
    pub id: StationId,
    pub location: NodeId,
    pub receptors: Vec<PrivateReceptor>,
    /// Cells this station has started.
    pub known_cells: BTreeSet<CellId>,
    /// Signatures learned from reports.
    pub feed: Vec<Vec<u8>>,
    pub inbox: Vec<Substance>,
    recent: HashMap<(NodeId, Vec<u8>), TimeStep>,
}

impl LymphNode {
    pub fn new(id: StationId, location: NodeId, receptors: Vec<PrivateReceptor>) -> Self {
        LymphNode {
            id,
            location,
            receptors,
            known_cells: BTreeSet::new(),
            feed: Vec::new(),
            inbox: Vec::new(),
            recent: HashMap::new(),
        }
    }
}

/// Locations of the lymph nodes, used to pick forwarding targets.
#[derive(Clone, Debug, Default)]
pub struct StationDirectory {
    lymph: Vec<(StationId, NodeId)>,
}

impl StationDirectory {
    pub fn new(mut lymph: Vec<(StationId, NodeId)>) -> Self {
        lymph.sort();
        StationDirectory { lymph }
    }

    pub fn lymph(&self) -> &[(StationId, NodeId)] {
        &self.lymph
    }

    /// Closest lymph node to `node` by hop count, ties to the smaller station id.
    pub fn nearest(&self, node: NodeId, routing: &RoutingTable) -> Option<(StationId, NodeId)> {
        self.nearest_among(node, routing, |_| true)
    }

    fn nearest_among(
        &self,
        node: NodeId,
        routing: &RoutingTable,
        keep: impl Fn(StationId) -> bool,
    ) -> Option<(StationId, NodeId)> {
        self.lymph
            .iter()
            .copied()
            .filter(|&(s, _)| keep(s))
            .min_by_key(|&(s, at)| (routing.distance(node, at).unwrap_or(u32::MAX), s))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RouteAction {
    Open(Vec<u8>),
    Forward {
        to: StationId,
        node: NodeId,
        substance: Substance,
    },
    /// TTL exhausted or nowhere left to go.
    Drop,
}

/// Open the substance if this station can; otherwise pass it on to the
/// nearest lymph node that has not tried yet.
pub fn lymph_route(station: &LymphNode, mut sub: Substance, dir: &StationDirectory, routing: &RoutingTable) -> RouteAction {
    if let Some(payload) = try_open(&sub, &station.receptors) {
        return RouteAction::Open(payload);
    }
    if sub.hop_ttl == 0 {
        return RouteAction::Drop;
    }
    if !sub.visited.contains(&station.id) {
        sub.visited.push(station.id);
    }
    let next = dir
        .nearest_among(station.location, routing, |s| s != station.id && !sub.visited.contains(&s))
        .or_else(|| dir.nearest_among(station.location, routing, |s| s != station.id));
    match next {
        Some((to, node)) => {
            sub.hop_ttl -= 1;
            sub.recipient = Some(to);
            RouteAction::Forward {
                to,
                node,
                substance: sub,
            }
        }
        None => RouteAction::Drop,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReportAction {
    /// Target of a newly requested disinfector.
    pub disinfect: Option<NodeId>,
    /// Signature to push to nearby detectors and the CNTS feed.
    pub immunize: Option<Vec<u8>>,
}

/// React to an infection report. Reports for the same (node, signature)
/// within `dedupe_window` steps of the last accepted one are ignored.
pub fn lymph_on_report(
    station: &mut LymphNode,
    report: &InfectionReport,
    clock: TimeStep,
    dedupe_window: u64,
) -> ReportAction {
    let key = (report.node, report.signature.clone());
    if let Some(&last) = station.recent.get(&key) {
        if clock.saturating_sub(last) < dedupe_window {
            return ReportAction::default();
        }
    }
    station.recent.insert(key, clock);
    let immunize = (!report.signature.is_empty()).then(|| report.signature.clone());
    if let Some(sig) = &immunize {
        if !station.feed.contains(sig) {
            station.feed.push(sig.clone());
        }
    }
    ReportAction {
        disinfect: Some(report.node),
        immunize,
    }
}

impl LymphNode {
    /// Forget dedupe entries for `node` once its disinfection has finished.
    pub fn resolve(&mut self, node: NodeId) {
        self.recent.retain(|(n, _), _| *n != node);
    }
}

#[derive(Clone, Debug)]
pub struct Cnts {
    pub id: StationId,
    pub location: NodeId,
    pub receptors: Vec<PrivateReceptor>,
    pub period: u64,
    pub mix: Vec<(CellKind, u32)>,
    /// Signatures given to every detector this station releases.
    pub trained: Vec<Vec<u8>>,
    pub inbox: Vec<Substance>,
}

impl Cnts {
    pub fn learn(&mut self, signature: &[u8]) -> bool {
        if self.trained.iter().any(|s| s == signature) {
            return false;
        }
        self.trained.push(signature.to_vec());
        true
    }
}

/// Kinds to release this step: the full mix on every `period`-th step.
pub fn cnts_release(station: &Cnts, clock: TimeStep) -> Vec<CellKind> {
    if station.period == 0 || (clock + 1) % station.period != 0 {
        return Vec::new();
    }
    station
        .mix
        .iter()
        .flat_map(|&(kind, count)| std::iter::repeat_n(kind, count as usize))
        .collect()
}
