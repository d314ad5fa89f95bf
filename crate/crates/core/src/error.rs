use thiserror::Error;

use crate::ids::{NodeId, PacketId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("topology needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("link ({0}, {1}) references an undeclared node")]
    UnknownEndpoint(NodeId, NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate link ({0}, {1})")]
    DuplicateLink(NodeId, NodeId),
    #[error("link ({0}, {1}) has zero bandwidth")]
    ZeroBandwidth(NodeId, NodeId),
    #[error("graph is disconnected: node {0} unreachable from node 0")]
    DisconnectedGraph(NodeId),
    #[error("could not generate a connected random graph after {0} attempts")]
    GenerationFailed(u32),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("component {0} is already registered")]
    DuplicateRegistration(String),
    #[error("component {0} is not registered there")]
    NotRegistered(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("conservation violated by packet {packet}: {reason}")]
    ConservationViolation { packet: PacketId, reason: String },
    #[error("in-flight mismatch for {class}: log implies {expected}, end marker reports {reported}")]
    InFlightMismatch {
        class: &'static str,
        expected: u64,
        reported: u64,
    },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("unknown knob `{0}`")]
    UnknownKnob(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EventParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("bad seed range `{0}`; expected `a..b`, `a..=b` or a single seed")]
    SeedRange(String),
    #[error("grid file: {0}")]
    Grid(String),
}
