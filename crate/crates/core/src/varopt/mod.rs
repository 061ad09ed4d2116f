//! Variational encoder/decoder optimization.

pub mod ansatz;
pub mod cell;
pub mod cmaes;
pub mod decoder;
pub mod grid;

pub use ansatz::{prepare_probe, AnsatzParams, Evolution, Layer, ProbeCircuit};
pub use cell::{
    optimize_cell, rescore, Cell, CellObjective, CellSettings, OptimizerSettings, RunRecord, WarmStart, SCHEMA_VERSION,
};
pub use cmaes::{cma_es_minimize, CmaesOptions, CmaesResult, StopReason};
pub use decoder::{apply_decoder, DecoderSpec, DecoderTier};
pub use grid::{best_per_cell, run_grid, GridOutcome, GridSpec, RunKey, STANDARD_SEEDS};
