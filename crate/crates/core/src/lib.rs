//! Deterministic time-stepped simulator of the SANA artificial immune
//! system for network security.

pub mod adversary;
pub mod audit;
pub mod cells;
pub mod comms;
pub mod defense;
pub mod error;
pub mod event;
pub mod harness;
pub mod ids;
pub mod metrics;
pub mod packet;
pub mod queue;
pub mod report;
pub mod routing;
pub mod scenario;
pub mod topology;
pub mod transport;
pub mod world;

pub use error::{AuditError, HarnessError, ScenarioError, SimError, TopologyError};
pub use event::{Event, EventKind, EventLog};
pub use harness::{run, sweep, RunOutput};
pub use ids::{AttackId, CellId, NodeId, PacketId, StationId, SubstanceId, TimeStep};
pub use metrics::Metrics;
pub use scenario::ScenarioConfig;
