//! Run metrics, computed from the event log alone so a persisted log
//! replays to the same numbers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::event::{EventKind, EventLog};
use crate::ids::{NodeId, PacketId, TimeStep};
use crate::packet::TrafficClass;

/// Rates with a zero denominator and latencies with no samples are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub steps: u64,
    pub attack_injected: u64,
    pub attack_destroyed: u64,
    pub prevention_rate: Option<f64>,
    pub worm_entries: u64,
    /// Distinct nodes infected by delivered attack packets (entry nodes excluded).
    pub infected_nodes: u64,
    pub infections_per_event: Option<f64>,
    pub infection_episodes: u64,
    pub identified_episodes: u64,
    /// Median steps from Infect to the first Identify of that infection.
    pub identification_latency: Option<f64>,
    pub disinfections: u64,
    /// Median steps from that Identify to the Disinfect ending the infection.
    pub disinfection_latency: Option<f64>,
    pub false_identifications: u64,
    /// Immune packet-hops over all packet-hops.
    pub overhead: Option<f64>,
    pub false_positive_detections: u64,
    pub false_disinfections: u64,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Default)]
struct Episode {
    infected_at: TimeStep,
    identified_at: Option<TimeStep>,
}

impl Metrics {
    pub fn from_log(log: &EventLog) -> Metrics {
        let mut m = Metrics::default();
        let mut packets: HashMap<PacketId, (TrafficClass, bool)> = HashMap::new();
        let mut entry_nodes = BTreeSet::new();
        let mut infected_by_packet = BTreeSet::new();
        let mut open: BTreeMap<NodeId, Episode> = BTreeMap::new();
        let mut id_latency = Vec::new();
        let mut dis_latency = Vec::new();
        let (mut immune_hops, mut all_hops) = (0u64, 0u64);

        for ev in log {
            let hop = |p: &PacketId, packets: &HashMap<PacketId, (TrafficClass, bool)>| {
                packets.get(p).map(|&(c, _)| c == TrafficClass::Immune)
            };
            match &ev.kind {
                EventKind::Step { .. } => m.steps += 1,
                EventKind::Inject {
                    packet, class, attack, ..
                } => {
                    packets.insert(*packet, (*class, attack.is_some()));
                    if attack.is_some() {
                        m.attack_injected += 1;
                    }
                }
                EventKind::Forward { packet, .. } | EventKind::Deliver { packet, .. } => {
                    if let Some(immune) = hop(packet, &packets) {
                        all_hops += 1;
                        immune_hops += immune as u64;
                    }
                }
                EventKind::Detect { packet, .. } => {
                    if let Some(immune) = hop(packet, &packets) {
                        all_hops += 1;
                        immune_hops += immune as u64;
                    }
                    match packets.get(packet) {
                        Some(&(_, true)) => m.attack_destroyed += 1,
                        Some(&(TrafficClass::Data, false)) => m.false_positive_detections += 1,
                        _ => {}
                    }
                }
                EventKind::Infect { node, packet, .. } => {
                    match packet {
                        None => {
                            m.worm_entries += 1;
                            entry_nodes.insert(*node);
                        }
                        Some(_) => {
                            infected_by_packet.insert(*node);
                        }
                    }
                    m.infection_episodes += 1;
                    open.insert(
                        *node,
                        Episode {
                            infected_at: ev.step,
                            identified_at: None,
                        },
                    );
                }
                EventKind::Identify { node, .. } => match open.get_mut(node) {
                    Some(ep) if ep.identified_at.is_none() => {
                        ep.identified_at = Some(ev.step);
                        m.identified_episodes += 1;
                        id_latency.push((ev.step - ep.infected_at) as f64);
                    }
                    Some(_) => {}
                    None => m.false_identifications += 1,
                },
                EventKind::Disinfect { node, .. } => {
                    m.disinfections += 1;
                    if let Some(ep) = open.remove(node) {
                        if let Some(t) = ep.identified_at {
                            dis_latency.push((ev.step - t) as f64);
                        }
                    }
                }
                EventKind::FalseDisinfect { .. } => m.false_disinfections += 1,
                _ => {}
            }
        }

        m.prevention_rate = ratio(m.attack_destroyed, m.attack_injected);
        m.infected_nodes = infected_by_packet.difference(&entry_nodes).count() as u64;
        m.infections_per_event = ratio(m.infected_nodes, m.worm_entries);
        m.identification_latency = median(&mut id_latency);
        m.disinfection_latency = median(&mut dis_latency);
        m.overhead = ratio(immune_hops, all_hops);
        m
    }

    /// Column names and values, in report order.
    pub fn fields(&self) -> Vec<(&'static str, Value)> {
        use Value::{Float, Int};
        vec![
            ("steps", Int(self.steps)),
            ("attack_injected", Int(self.attack_injected)),
            ("attack_destroyed", Int(self.attack_destroyed)),
            ("prevention_rate", Float(self.prevention_rate)),
            ("worm_entries", Int(self.worm_entries)),
            ("infected_nodes", Int(self.infected_nodes)),
            ("infections_per_event", Float(self.infections_per_event)),
            ("infection_episodes", Int(self.infection_episodes)),
            ("identified_episodes", Int(self.identified_episodes)),
            ("identification_latency", Float(self.identification_latency)),
            ("disinfections", Int(self.disinfections)),
            ("disinfection_latency", Float(self.disinfection_latency)),
            ("false_identifications", Int(self.false_identifications)),
            ("overhead", Float(self.overhead)),
            ("false_positive_detections", Int(self.false_positive_detections)),
            ("false_disinfections", Int(self.false_disinfections)),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(u64),
    Float(Option<f64>),
    Text(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Event;

    fn log(lines: &[&str]) -> EventLog {
        EventLog::from(
            lines
                .iter()
                .enumerate()
                .map(|(i, l)| Event::parse(l, i + 1).unwrap())
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn empty_log_has_null_rates() {
        let m = Metrics::from_log(&EventLog::new());
        assert_eq!(m, Metrics::default());
        assert_eq!(m.prevention_rate, None);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn latencies_follow_episodes() {
        let l = log(&[
            "step=10 kind=Infect node=3 attack=0 packet=-",
            "step=12 kind=Inject packet=0 class=data src=3 dst=4 attack=0 cell=- substance=-",
            "step=13 kind=Detect packet=0 node=5 from=3 by=cell:1 sig=aa",
            "step=70 kind=Identify node=3 cell=2",
            "step=75 kind=Identify node=3 cell=2",
            "step=80 kind=Disinfect node=3 cell=9",
            "step=81 kind=Identify node=3 cell=2",
        ]);
        let m = Metrics::from_log(&l);
        assert_eq!(m.worm_entries, 1);
        assert_eq!(m.identification_latency, Some(60.0));
        assert_eq!(m.disinfection_latency, Some(10.0));
        assert_eq!(m.false_identifications, 1);
        assert_eq!(m.prevention_rate, Some(1.0));
        assert_eq!(m.infections_per_event, Some(0.0));
    }
}
