//! Mobile artificial cells: detectors, AGNOSCO ants, monitors and disinfectors.

mod cell;
mod pheromone;
mod signature_db;

pub use cell::{
    anima_check, cell_step, disinfect_apply, monitor_collect, trail_source, Action, AnimaVerdict, ArtificialCell, CellKind,
    CellParams, CellPopulation, CellState, DisinfectOutcome, NodeContext, StatusRecord,
};
pub use pheromone::{
    agnosco_declare, agnosco_move, move_weights, AgnoscoParams, DetectionEvent, PheromoneMap, CLAMP_FLOOR,
    REVISIT_PENALTY,
};
pub use signature_db::{bloom_bits, compress_signatures, CompressedSignatureDb, DbError};
