//! Identifier newtypes shared across the simulator.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One synchronous simulation round.
pub type TimeStep = u64;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident($inner:ty)) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl std::str::FromStr for $name {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.parse().map($name)
            }
        }
    };
}

id_newtype!(
    /// Index of a node in the network, `0..n`.
    NodeId(u32)
);
id_newtype!(PacketId(u64));
id_newtype!(CellId(u64));
id_newtype!(AttackId(u32));
id_newtype!(
    /// Lymph nodes and CNTS share one station id space.
    StationId(u32)
);
id_newtype!(SubstanceId(u64));
