//! Packet conservation: every injected packet is delivered, dropped,
//! destroyed by a security component, or still queued when the run ends.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::AuditError;
use crate::event::{EventKind, EventLog};
use crate::ids::PacketId;
use crate::packet::TrafficClass;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub injected: u64,
    pub delivered: u64,
    /// Queue overflow drops plus evictions.
    pub dropped: u64,
    pub destroyed: u64,
    pub in_flight: u64,
}

impl ClassCounts {
    pub fn balanced(&self) -> bool {
        self.injected == self.delivered + self.dropped + self.destroyed + self.in_flight
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub data: ClassCounts,
    pub immune: ClassCounts,
    pub detect_events: u64,
}

impl AuditReport {
    fn class_mut(&mut self, class: TrafficClass) -> &mut ClassCounts {
        match class {
            TrafficClass::Data => &mut self.data,
            TrafficClass::Immune => &mut self.immune,
        }
    }
}

pub fn conservation_audit(log: &EventLog) -> Result<AuditReport, AuditError> {
    let mut report = AuditReport::default();
    // packet -> (class, still in the network)
    let mut live: HashMap<PacketId, (TrafficClass, bool)> = HashMap::new();
    let violation = |packet: PacketId, reason: &str| AuditError::ConservationViolation {
        packet,
        reason: reason.to_string(),
    };
    let mut end_marker = None;

    for event in log {
        let terminal = match &event.kind {
            EventKind::Inject { packet, class, .. } => {
                if live.insert(*packet, (*class, true)).is_some() {
                    return Err(violation(*packet, "injected twice"));
                }
                report.class_mut(*class).injected += 1;
                None
            }
            EventKind::Forward { packet, .. } => match live.get(packet) {
                Some((_, true)) => None,
                Some((_, false)) => return Err(violation(*packet, "forwarded after leaving the network")),
                None => return Err(violation(*packet, "forwarded without injection")),
            },
            EventKind::Deliver { packet, .. } => Some((*packet, 0)),
            EventKind::Drop { packet, .. } | EventKind::Evict { packet, .. } => Some((*packet, 1)),
            EventKind::Detect { packet, .. } => {
                report.detect_events += 1;
                Some((*packet, 2))
            }
            EventKind::End { data, immune } => {
                end_marker = Some((*data, *immune));
                None
            }
            _ => None,
        };
        if let Some((packet, outcome)) = terminal {
            let Some(entry) = live.get_mut(&packet) else {
                return Err(violation(packet, "terminal event without injection"));
            };
            if !entry.1 {
                return Err(violation(packet, "second terminal event"));
            }
            entry.1 = false;
            let counts = report.class_mut(entry.0);
            match outcome {
                0 => counts.delivered += 1,
                1 => counts.dropped += 1,
                _ => counts.destroyed += 1,
            }
        }
    }

    for (class, alive) in live.values() {
        if *alive {
            report.class_mut(*class).in_flight += 1;
        }
    }
    if let Some((data, immune)) = end_marker {
        for (name, expected, reported) in [
            ("data", report.data.in_flight, data),
            ("immune", report.immune.in_flight, immune),
        ] {
            if expected != reported {
                return Err(AuditError::InFlightMismatch {
                    class: name,
                    expected,
                    reported,
                });
            }
        }
    }
    debug_assert!(report.data.balanced() && report.immune.balanced());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::NodeId;

    #[test]
    fn empty_log_has_zero_counters() {
        let report = conservation_audit(&EventLog::new()).unwrap();
        assert_eq!(report, AuditReport::default());
    }

    #[test]
    fn double_delivery_is_a_violation() {
        let mut log = EventLog::new();
        log.push(
            0,
            EventKind::Inject {
                packet: PacketId(4),
                class: TrafficClass::Data,
                src: NodeId(0),
                dst: NodeId(1),
                attack: None,
                cell: None,
                substance: None,
            },
        );
        for _ in 0..2 {
            log.push(
                1,
                EventKind::Deliver {
                    packet: PacketId(4),
                    from: NodeId(0),
                    node: NodeId(1),
                },
            );
        }
        assert!(matches!(
            conservation_audit(&log),
            Err(AuditError::ConservationViolation { packet: PacketId(4), .. })
        ));
    }

    #[test]
    fn end_marker_must_match() {
        let mut log = EventLog::new();
        log.push(0, EventKind::End { data: 1, immune: 0 });
        assert!(matches!(
            conservation_audit(&log),
            Err(AuditError::InFlightMismatch { class: "data", .. })
        ));
    }
}
