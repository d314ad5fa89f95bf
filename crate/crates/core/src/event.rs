//! Append-only event log with a stable line format:
//! `step=<int> kind=<Kind> key=value ...`, one event per line.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::cells::CellKind;
use crate::comms::{Holder, Topic};
use crate::defense::ComponentId;
use crate::error::EventParseError;
use crate::ids::{AttackId, CellId, NodeId, PacketId, StationId, SubstanceId, TimeStep};
use crate::packet::TrafficClass;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RetireReason {
    /// Task completed (disinfectors).
    Done,
    /// Replaced by a fresher cell of the same kind.
    Replaced,
    /// Transport packet was lost in the network.
    Lost,
}

impl fmt::Display for RetireReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetireReason::Done => "done",
            RetireReason::Replaced => "replaced",
            RetireReason::Lost => "lost",
        })
    }
}

impl FromStr for RetireReason {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "done" => Ok(RetireReason::Done),
            "replaced" => Ok(RetireReason::Replaced),
            "lost" => Ok(RetireReason::Lost),
            _ => Err(format!("unknown retire reason `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    /// End-of-step marker written during metrics sampling.
    Step { queued: u64, infected: u64 },
    Inject {
        packet: PacketId,
        class: TrafficClass,
        src: NodeId,
        dst: NodeId,
        attack: Option<AttackId>,
        cell: Option<CellId>,
        substance: Option<SubstanceId>,
    },
    Forward { packet: PacketId, from: NodeId, to: NodeId },
    Deliver { packet: PacketId, from: NodeId, node: NodeId },
    /// Queue overflow; `from` is `None` when the packet was being injected.
    Drop { packet: PacketId, node: NodeId, from: Option<NodeId> },
    Evict { packet: PacketId, node: NodeId },
    Detect {
        packet: PacketId,
        node: NodeId,
        from: NodeId,
        by: ComponentId,
        signature: Option<Vec<u8>>,
    },
    /// `packet` is `None` for a worm entry.
    Infect { node: NodeId, attack: AttackId, packet: Option<PacketId> },
    EntryFailed { node: NodeId, attack: AttackId },
    Disinfect { node: NodeId, cell: CellId },
    FalseDisinfect { node: NodeId, cell: CellId },
    Identify { node: NodeId, cell: CellId },
    CellMove { cell: CellId, from: NodeId, to: NodeId },
    Spawn { cell: CellId, kind: CellKind, node: NodeId, station: Option<StationId> },
    Retire { cell: CellId, reason: RetireReason },
    SubstanceSend { substance: SubstanceId, topic: Topic, origin: NodeId, dst: Option<NodeId> },
    SubstanceOpen { substance: SubstanceId, node: NodeId, by: Holder },
    SubstanceDrop { substance: SubstanceId, node: NodeId },
    Collect { cell: CellId, node: NodeId, occupancy: u64 },
    /// Packets still queued when the run stopped.
    End { data: u64, immune: u64 },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Step { .. } => "Step",
            EventKind::Inject { .. } => "Inject",
            EventKind::Forward { .. } => "Forward",
            EventKind::Deliver { .. } => "Deliver",
            EventKind::Drop { .. } => "Drop",
            EventKind::Evict { .. } => "Evict",
            EventKind::Detect { .. } => "Detect",
            EventKind::Infect { .. } => "Infect",
            EventKind::EntryFailed { .. } => "EntryFailed",
            EventKind::Disinfect { .. } => "Disinfect",
            EventKind::FalseDisinfect { .. } => "FalseDisinfect",
            EventKind::Identify { .. } => "Identify",
            EventKind::CellMove { .. } => "CellMove",
            EventKind::Spawn { .. } => "Spawn",
            EventKind::Retire { .. } => "Retire",
            EventKind::SubstanceSend { .. } => "SubstanceSend",
            EventKind::SubstanceOpen { .. } => "SubstanceOpen",
            EventKind::SubstanceDrop { .. } => "SubstanceDrop",
            EventKind::Collect { .. } => "Collect",
            EventKind::End { .. } => "End",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub step: TimeStep,
    pub kind: EventKind,
}

struct Opt<'a, T>(&'a Option<T>);

impl<T: fmt::Display> fmt::Display for Opt<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => v.fmt(f),
            None => f.write_str("-"),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step={} kind={}", self.step, self.kind.name())?;
        match &self.kind {
            EventKind::Step { queued, infected } => write!(f, " queued={queued} infected={infected}"),
            EventKind::Inject {
                packet,
                class,
                src,
                dst,
                attack,
                cell,
                substance,
            } => write!(
                f,
                " packet={packet} class={class} src={src} dst={dst} attack={} cell={} substance={}",
                Opt(attack),
                Opt(cell),
                Opt(substance)
            ),
            EventKind::Forward { packet, from, to } => write!(f, " packet={packet} from={from} to={to}"),
            EventKind::Deliver { packet, from, node } => {
                write!(f, " packet={packet} from={from} node={node}")
            }
            EventKind::Drop { packet, node, from } => {
                write!(f, " packet={packet} node={node} from={}", Opt(from))
            }
            EventKind::Evict { packet, node } => write!(f, " packet={packet} node={node}"),
            EventKind::Detect {
                packet,
                node,
                from,
                by,
                signature,
            } => {
                write!(f, " packet={packet} node={node} from={from} by={by} sig=")?;
                match signature {
                    Some(sig) => f.write_str(&hex::encode(sig)),
                    None => f.write_str("-"),
                }
            }
            EventKind::Infect { node, attack, packet } => {
                write!(f, " node={node} attack={attack} packet={}", Opt(packet))
            }
            EventKind::EntryFailed { node, attack } => write!(f, " node={node} attack={attack}"),
            EventKind::Disinfect { node, cell }
            | EventKind::FalseDisinfect { node, cell }
            | EventKind::Identify { node, cell } => write!(f, " node={node} cell={cell}"),
            EventKind::CellMove { cell, from, to } => write!(f, " cell={cell} from={from} to={to}"),
            EventKind::Spawn {
                cell,
                kind,
                node,
                station,
            } => write!(f, " cell={cell} cell_kind={kind} node={node} station={}", Opt(station)),
            EventKind::Retire { cell, reason } => write!(f, " cell={cell} reason={reason}"),
            EventKind::SubstanceSend {
                substance,
                topic,
                origin,
                dst,
            } => write!(
                f,
                " substance={substance} topic={topic} origin={origin} dst={}",
                Opt(dst)
            ),
            EventKind::SubstanceOpen { substance, node, by } => {
                write!(f, " substance={substance} node={node} by={by}")
            }
            EventKind::SubstanceDrop { substance, node } => write!(f, " substance={substance} node={node}"),
            EventKind::Collect { cell, node, occupancy } => {
                write!(f, " cell={cell} node={node} occupancy={occupancy}")
            }
            EventKind::End { data, immune } => write!(f, " data={data} immune={immune}"),
        }
    }
}

struct Fields<'a> {
    line: usize,
    map: HashMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn err(&self, message: impl Into<String>) -> EventParseError {
        EventParseError::Malformed {
            line: self.line,
            message: message.into(),
        }
    }

    fn raw(&self, key: &str) -> Result<&'a str, EventParseError> {
        self.map
            .get(key)
            .copied()
            .ok_or_else(|| self.err(format!("missing field `{key}`")))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, EventParseError> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| self.err(format!("bad value `{raw}` for `{key}`")))
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, EventParseError> {
        match self.raw(key)? {
            "-" => Ok(None),
            _ => self.get(key).map(Some),
        }
    }
}

impl Event {
    /// Parse one line produced by `Display`. `line` is used for error reporting.
    pub fn parse(text: &str, line: usize) -> Result<Event, EventParseError> {
        let mut map = HashMap::new();
        for token in text.split_whitespace() {
            let (k, v) = token.split_once('=').ok_or_else(|| EventParseError::Malformed {
                line,
                message: format!("token `{token}` is not key=value"),
            })?;
            map.insert(k, v);
        }
        let f = Fields { line, map };
        let step = f.get("step")?;
        let kind = match f.raw("kind")? {
            "Step" => EventKind::Step {
                queued: f.get("queued")?,
                infected: f.get("infected")?,
            },
            "Inject" => EventKind::Inject {
                packet: f.get("packet")?,
                class: f.get("class")?,
                src: f.get("src")?,
                dst: f.get("dst")?,
                attack: f.opt("attack")?,
                cell: f.opt("cell")?,
                substance: f.opt("substance")?,
            },
            "Forward" => EventKind::Forward {
                packet: f.get("packet")?,
                from: f.get("from")?,
                to: f.get("to")?,
            },
            "Deliver" => EventKind::Deliver {
                packet: f.get("packet")?,
                from: f.get("from")?,
                node: f.get("node")?,
            },
            "Drop" => EventKind::Drop {
                packet: f.get("packet")?,
                node: f.get("node")?,
                from: f.opt("from")?,
            },
            "Evict" => EventKind::Evict {
                packet: f.get("packet")?,
                node: f.get("node")?,
            },
            "Detect" => EventKind::Detect {
                packet: f.get("packet")?,
                node: f.get("node")?,
                from: f.get("from")?,
                by: f.get("by")?,
                signature: match f.raw("sig")? {
                    "-" => None,
                    h => Some(hex::decode(h).map_err(|_| f.err("bad signature hex"))?),
                },
            },
            "Infect" => EventKind::Infect {
                node: f.get("node")?,
                attack: f.get("attack")?,
                packet: f.opt("packet")?,
            },
            "EntryFailed" => EventKind::EntryFailed {
                node: f.get("node")?,
                attack: f.get("attack")?,
            },
            "Disinfect" => EventKind::Disinfect {
                node: f.get("node")?,
                cell: f.get("cell")?,
            },
            "FalseDisinfect" => EventKind::FalseDisinfect {
                node: f.get("node")?,
                cell: f.get("cell")?,
            },
            "Identify" => EventKind::Identify {
                node: f.get("node")?,
                cell: f.get("cell")?,
            },
            "CellMove" => EventKind::CellMove {
                cell: f.get("cell")?,
                from: f.get("from")?,
                to: f.get("to")?,
            },
            "Spawn" => EventKind::Spawn {
                cell: f.get("cell")?,
                kind: f.get("cell_kind")?,
                node: f.get("node")?,
                station: f.opt("station")?,
            },
            "Retire" => EventKind::Retire {
                cell: f.get("cell")?,
                reason: f.get("reason")?,
            },
            "SubstanceSend" => EventKind::SubstanceSend {
                substance: f.get("substance")?,
                topic: f.get("topic")?,
                origin: f.get("origin")?,
                dst: f.opt("dst")?,
            },
            "SubstanceOpen" => EventKind::SubstanceOpen {
                substance: f.get("substance")?,
                node: f.get("node")?,
                by: f.get("by")?,
            },
            "SubstanceDrop" => EventKind::SubstanceDrop {
                substance: f.get("substance")?,
                node: f.get("node")?,
            },
            "Collect" => EventKind::Collect {
                cell: f.get("cell")?,
                node: f.get("node")?,
                occupancy: f.get("occupancy")?,
            },
            "End" => EventKind::End {
                data: f.get("data")?,
                immune: f.get("immune")?,
            },
            other => return Err(f.err(format!("unknown kind `{other}`"))),
        };
        Ok(Event { step, kind })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: TimeStep, kind: EventKind) {
        self.events.push(Event { step, kind });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    /// Render the whole log, one line per event, trailing newline included.
    pub fn render(&self) -> String {
        use std::fmt::Write;
        let mut out = String::with_capacity(self.events.len() * 48);
        for e in &self.events {
            writeln!(out, "{e}").unwrap();
        }
        out
    }

    pub fn write_to(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        for e in &self.events {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<EventLog, EventParseError> {
        let events = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| Event::parse(l, i + 1))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EventLog { events })
    }
}

impl From<Vec<Event>> for EventLog {
    fn from(events: Vec<Event>) -> Self {
        EventLog { events }
    }
}

impl<'a> IntoIterator for &'a EventLog {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;
    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}
