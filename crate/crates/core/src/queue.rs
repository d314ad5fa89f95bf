//! Bounded two-lane FIFO queue held by every node.

use std::collections::VecDeque;

use crate::packet::{Packet, TrafficClass};

pub const DEFAULT_CAPACITY: usize = 32;

#[derive(Debug, PartialEq)]
pub enum EnqueueOutcome {
    Accepted,
    /// Queue was full; the offered packet is returned.
    Dropped(Packet),
    /// Offered immune packet admitted by evicting the newest data packet.
    Evicted(Packet),
}

#[derive(Clone, Debug)]
pub struct NodeQueue {
    capacity: usize,
    immune_lane: VecDeque<Packet>,
    data_lane: VecDeque<Packet>,
}

impl NodeQueue {
    pub fn new(capacity: usize) -> Self {
        NodeQueue {
            capacity,
            immune_lane: VecDeque::new(),
            data_lane: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.immune_lane.len() + self.data_lane.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lane_len(&self, class: TrafficClass) -> usize {
        self.lane(class).len()
    }

    fn lane(&self, class: TrafficClass) -> &VecDeque<Packet> {
        match class {
            TrafficClass::Immune => &self.immune_lane,
            TrafficClass::Data => &self.data_lane,
        }
    }

    pub fn enqueue(&mut self, packet: Packet) -> EnqueueOutcome {
        if self.len() < self.capacity {
            match packet.class {
                TrafficClass::Immune => self.immune_lane.push_back(packet),
                TrafficClass::Data => self.data_lane.push_back(packet),
            }
            return EnqueueOutcome::Accepted;
        }
        if packet.class == TrafficClass::Immune {
            if let Some(victim) = self.data_lane.pop_back() {
                self.immune_lane.push_back(packet);
                return EnqueueOutcome::Evicted(victim);
            }
        }
        EnqueueOutcome::Dropped(packet)
    }

    /// Head of the highest-priority non-empty lane.
    pub fn peek(&self) -> Option<&Packet> {
        self.immune_lane.front().or_else(|| self.data_lane.front())
    }

    pub fn dequeue(&mut self) -> Option<Packet> {
        self.immune_lane.pop_front().or_else(|| self.data_lane.pop_front())
    }

    /// Immune lane then data lane, each front to back.
    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.immune_lane.iter().chain(self.data_lane.iter())
    }
}
