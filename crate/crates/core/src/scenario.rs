//! Scenario files: one TOML document describing everything a run needs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackDef, RateDistribution};
use crate::cells::{AgnoscoParams, CellKind};
use crate::defense::FilterRule;
use crate::error::ScenarioError;
use crate::ids::NodeId;
use crate::queue::DEFAULT_CAPACITY;
use crate::topology::TopologySpec;

/// The scenario shipped with the crate.
pub const BASELINE: &str = include_str!("../scenarios/baseline.scenario");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub horizon: u64,
    pub topology: TopologySpec,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub attacks: Vec<AttackDef>,
    #[serde(default)]
    pub cells: CellConfig,
    #[serde(default)]
    pub agnosco: AgnoscoParams,
    pub stations: StationConfig,
    #[serde(default)]
    pub defense: DefenseConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub queue_capacity: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            queue_capacity: DEFAULT_CAPACITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Mean benign packets per step, network-wide.
    pub background_rate: f64,
    pub distribution: RateDistribution,
    pub payload_len: usize,
    /// Probability that a node has the security hole.
    pub vulnerability: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            background_rate: 20.0,
            distribution: RateDistribution::Poisson,
            payload_len: 16,
            vulnerability: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellConfig {
    pub detectors: u32,
    pub ants: u32,
    pub monitors: u32,
    pub p_move: f64,
    /// Target false-positive rate of detector signature stores.
    pub db_fpr: f64,
    /// Monitor buffer size that triggers a flush to the administrator.
    pub monitor_flush: usize,
    /// Per-kind population caps enforced on CNTS release; defaults to the
    /// initial count of that kind.
    pub caps: BTreeMap<CellKind, u32>,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            detectors: 30,
            ants: 20,
            monitors: 2,
            p_move: 0.5,
            db_fpr: 0.01,
            monitor_flush: 10,
            caps: BTreeMap::new(),
        }
    }
}

impl CellConfig {
    pub fn cap(&self, kind: CellKind) -> Option<u32> {
        self.caps.get(&kind).copied().or(match kind {
            CellKind::Detector => Some(self.detectors),
            CellKind::Ant => Some(self.ants),
            CellKind::Monitor => Some(self.monitors),
            CellKind::Disinfector => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationConfig {
    /// Node of each lymph node, in station-id order.
    pub lymph: Vec<NodeId>,
    /// Node of each CNTS; their station ids follow the lymph nodes'.
    pub cnts: Vec<NodeId>,
    #[serde(default)]
    pub admin: NodeId,
    /// Immunization radius in hops.
    #[serde(default = "d_radius")]
    pub radius: u32,
    /// Report deduplication window in steps.
    #[serde(default = "d_dedupe")]
    pub dedupe: u64,
    /// Station-to-station forwards per substance; defaults to four times the diameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttl: Option<u32>,
    #[serde(default = "d_period")]
    pub cnts_period: u64,
    #[serde(default = "d_mix")]
    pub cnts_mix: BTreeMap<CellKind, u32>,
}

fn d_radius() -> u32 {
    2
}
fn d_dedupe() -> u64 {
    200
}
fn d_period() -> u64 {
    100
}
fn d_mix() -> BTreeMap<CellKind, u32> {
    [(CellKind::Detector, 2), (CellKind::Ant, 1)].into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefenseConfig {
    /// Static IDS placements.
    pub ids: Vec<NodeId>,
    /// Additional IDS at the this many highest-betweenness nodes.
    pub ids_top_betweenness: usize,
    pub filters: Vec<FilterConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub node: NodeId,
    pub rules: Vec<FilterRule>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn baseline() -> Self {
        Self::parse(BASELINE).expect("bundled baseline scenario is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let v = |f: &str, m: &str| ScenarioError::validation(f, m);
        let nodes = self.topology.node_count();
        if nodes < 2 {
            return Err(v("topology.nodes", "need at least 2 nodes"));
        }
        let node_ok = |n: NodeId| n.index() < nodes;
        let rate_ok = |r: f64| r.is_finite() && r >= 0.0;
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);

        if self.network.queue_capacity == 0 {
            return Err(v("network.queue_capacity", "must be at least 1"));
        }
        if !rate_ok(self.traffic.background_rate) {
            return Err(v("traffic.background_rate", "must be a non-negative number"));
        }
        if !prob_ok(self.traffic.vulnerability) {
            return Err(v("traffic.vulnerability", "must lie in [0, 1]"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, a) in self.attacks.iter().enumerate() {
            if !seen.insert(a.id) {
                return Err(v(&format!("attacks.{i}.id"), "duplicate attack id"));
            }
            if a.signature.is_empty() {
                return Err(v(&format!("attacks.{i}.signature"), "must be non-empty"));
            }
            if !rate_ok(a.rate) {
                return Err(v(&format!("attacks.{i}.rate"), "must be a non-negative number"));
            }
            if a.entry_step.is_some() && !a.infects {
                return Err(v(&format!("attacks.{i}.entry_step"), "only infecting attacks have an entry"));
            }
            if a.entry_node.is_some_and(|n| !node_ok(n)) {
                return Err(v(&format!("attacks.{i}.entry_node"), "no such node"));
            }
        }
        if !prob_ok(self.cells.p_move) {
            return Err(v("cells.p_move", "must lie in [0, 1]"));
        }
        if !(self.cells.db_fpr > 0.0 && self.cells.db_fpr < 1.0) {
            return Err(v("cells.db_fpr", "must lie in (0, 1)"));
        }
        if self.cells.monitor_flush == 0 {
            return Err(v("cells.monitor_flush", "must be at least 1"));
        }
        let a = &self.agnosco;
        if !(a.evaporation > 0.0 && a.evaporation < 1.0) {
            return Err(v("agnosco.evaporation", "must lie in (0, 1)"));
        }
        if !(a.deposit > 0.0 && a.deposit.is_finite()) {
            return Err(v("agnosco.deposit", "must be positive"));
        }
        if !(a.threshold > 0.0 && a.threshold.is_finite()) {
            return Err(v("agnosco.threshold", "must be positive"));
        }
        if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
            return Err(v("agnosco.epsilon", "must be positive"));
        }
        let s = &self.stations;
        if s.lymph.is_empty() {
            return Err(v("stations.lymph", "need at least one lymph node"));
        }
        if s.cnts.is_empty() {
            return Err(v("stations.cnts", "need at least one CNTS"));
        }
        for (field, list) in [("stations.lymph", &s.lymph), ("stations.cnts", &s.cnts)] {
            if list.iter().any(|&n| !node_ok(n)) {
                return Err(v(field, "no such node"));
            }
        }
        if !node_ok(s.admin) {
            return Err(v("stations.admin", "no such node"));
        }
        if s.cnts_period == 0 {
            return Err(v("stations.cnts_period", "must be at least 1"));
        }
        if self.defense.ids.iter().any(|&n| !node_ok(n)) {
            return Err(v("defense.ids", "no such node"));
        }
        if self.defense.ids_top_betweenness > nodes {
            return Err(v("defense.ids_top_betweenness", "exceeds node count"));
        }
        if self.defense.filters.iter().any(|f| !node_ok(f.node)) {
            return Err(v("defense.filters", "no such node"));
        }
        Ok(())
    }

    /// Set a dotted knob such as `traffic.background_rate` or
    /// `attacks.0.fanout`. Unknown keys are rejected.
    pub fn with_knob(&self, knob: &str, value: toml::Value) -> Result<Self, ScenarioError> {
        let mut doc = toml::Value::try_from(self).expect("scenario serializes");
        let parts: Vec<&str> = knob.split('.').collect();
        let unknown = || ScenarioError::UnknownKnob(knob.to_string());
        let (last, path) = parts.split_last().ok_or_else(unknown)?;
        let mut cursor = &mut doc;
        for part in path {
            cursor = match cursor {
                toml::Value::Table(t) => t.get_mut(*part).ok_or_else(unknown)?,
                toml::Value::Array(a) => a
                    .get_mut(part.parse::<usize>().map_err(|_| unknown())?)
                    .ok_or_else(unknown)?,
                _ => return Err(unknown()),
            };
        }
        match cursor {
            toml::Value::Table(t) => {
                t.insert(last.to_string(), value);
            }
            toml::Value::Array(a) => {
                let slot = a
                    .get_mut(last.parse::<usize>().map_err(|_| unknown())?)
                    .ok_or_else(unknown)?;
                *slot = value;
            }
            _ => return Err(unknown()),
        }
        let config: ScenarioConfig = doc.try_into().map_err(|e: toml::de::Error| {
            if e.message().contains("unknown field") {
                unknown()
            } else {
                ScenarioError::validation(knob, e.message())
            }
        })?;
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_loads() {
        let c = ScenarioConfig::baseline();
        assert_eq!(c.topology.node_count(), 50);
        assert_eq!(c.horizon, 2000);
    }

    #[test]
    fn negative_rate_is_rejected() {
        let text = BASELINE.replace("background_rate = 20.0", "background_rate = -1.0");
        assert_ne!(text, BASELINE);
        match ScenarioConfig::parse(&text) {
            Err(ScenarioError::Validation { field, .. }) => assert_eq!(field, "traffic.background_rate"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = format!("{BASELINE}\n[bogus]\nx = 1\n");
        match ScenarioConfig::parse(&text) {
            Err(ScenarioError::Parse { line, .. }) => assert!(line > 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn knobs() {
        let c = ScenarioConfig::baseline();
        let d = c.with_knob("attacks.0.fanout", toml::Value::Integer(5)).unwrap();
        assert_eq!(d.attacks[0].fanout, 5);
        assert!(matches!(
            c.with_knob("traffic.nope", toml::Value::Integer(1)),
            Err(ScenarioError::UnknownKnob(_))
        ));
        assert!(matches!(
            c.with_knob("nope.x", toml::Value::Integer(1)),
            Err(ScenarioError::UnknownKnob(_))
        ));
    }
}
