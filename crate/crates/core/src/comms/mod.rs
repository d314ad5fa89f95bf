//! Receptor-gated cell communication and the fixed immune stations.
//!
//! A [`Receptor`] is a public/private token pair. Messages travel as
//! [`Substance`]s sealed against a set of public tokens; only a holder of
//! every matching private token can open one. There is no key server:
//! stations and cells are provisioned with their receptors when created.

mod receptor;
mod stations;
mod substance;

use std::fmt;
use std::str::FromStr;

use crate::ids::{CellId, StationId};

pub use receptor::{gen_receptor, PrivateReceptor, PublicReceptor, Receptor};
pub use stations::{
    cnts_release, lymph_on_report, lymph_route, Cnts, InfectionReport, LymphNode, ReportAction, RouteAction,
    StationDirectory,
};
pub use substance::{seal, try_open, KeyedStream, SealError, SealScheme, Substance};

/// What a substance is about; carried in the clear for logging and routing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Topic {
    /// Infection report from AGNOSCO to lymph nodes.
    Report,
    /// Signature push from a lymph node to nearby detectors.
    Immunize,
    /// Signature feed update from a lymph node to the CNTS.
    Feed,
    /// Monitor status flush to the administrator.
    Status,
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topic::Report => "report",
            Topic::Immunize => "immunize",
            Topic::Feed => "feed",
            Topic::Status => "status",
        })
    }
}

impl FromStr for Topic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "report" => Ok(Topic::Report),
            "immunize" => Ok(Topic::Immunize),
            "feed" => Ok(Topic::Feed),
            "status" => Ok(Topic::Status),
            _ => Err(format!("unknown topic `{s}`")),
        }
    }
}

/// Who opened a substance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Holder {
    Station(StationId),
    Cell(CellId),
    Admin,
}

impl fmt::Display for Holder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Holder::Station(s) => write!(f, "station:{s}"),
            Holder::Cell(c) => write!(f, "cell:{c}"),
            Holder::Admin => f.write_str("admin"),
        }
    }
}

impl FromStr for Holder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "admin" {
            return Ok(Holder::Admin);
        }
        let bad = || format!("bad holder `{s}`");
        let (kind, id) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "station" => id.parse().map(Holder::Station).map_err(|_| bad()),
            "cell" => id.parse().map(Holder::Cell).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}
