//! Multi-seed grid execution with layerwise warm starts.
//!
//! The grid is split into lineages `(N, tier, seed)`. Inside a lineage the
//! depths run in ascending order and depth `L` is seeded with the depth
//! `L - 1` optimum when that record exists. Lineages run through
//! [`crate::par`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cell::{optimize_cell, Cell, CellSettings, RunRecord, WarmStart};
use super::decoder::DecoderTier;
use crate::error::{Error, Result};
use crate::par;

pub const STANDARD_SEEDS: [u64; 5] = [204, 604, 1204, 2004, 3004];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub layers: Vec<usize>,
    pub n_spins: Vec<usize>,
    pub tiers: Vec<DecoderTier>,
    pub seeds: Vec<u64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            layers: vec![1, 2, 3],
            n_spins: vec![2, 3, 4, 5, 6],
            tiers: DecoderTier::ALL.to_vec(),
            seeds: STANDARD_SEEDS.to_vec(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.n_spins.is_empty() || self.tiers.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig("grid lists must be nonempty".into()));
        }
        if self.layers.contains(&0) {
            return Err(Error::InvalidConfig("layer counts must be positive".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seeds must be distinct".into()));
        }
        Ok(())
    }

    /// Every `(cell, seed)` in canonical order.
    pub fn keys(&self) -> Vec<RunKey> {
        let mut keys = Vec::new();
        for &layers in &self.layers {
            for &n_spins in &self.n_spins {
                for &tier in &self.tiers {
                    for &seed in &self.seeds {
                        keys.push(RunKey {
                            cell: Cell::new(layers, n_spins, tier),
                            seed,
                        });
                    }
                }
            }
        }
        keys.sort();
        keys.dedup();
        keys
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub cell: Cell,
    pub seed: u64,
}

impl RunKey {
    pub fn of(record: &RunRecord) -> Self {
        Self {
            cell: record.cell,
            seed: record.seed,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GridOutcome {
    /// Completed and newly computed records in key order.
    pub records: Vec<RunRecord>,
    pub failures: Vec<(RunKey, String)>,
}

impl GridOutcome {
    /// Best record per cell by objective.
    pub fn best_per_cell(&self) -> BTreeMap<Cell, &RunRecord> {
        best_per_cell(&self.records)
    }
}

pub fn best_per_cell(records: &[RunRecord]) -> BTreeMap<Cell, &RunRecord> {
    let mut best: BTreeMap<Cell, &RunRecord> = BTreeMap::new();
    for r in records {
        best.entry(r.cell)
            .and_modify(|b| {
                if r.objective > b.objective {
                    *b = r;
                }
            })
            .or_insert(r);
    }
    best
}

enum Step {
    Reused(RunRecord),
    Computed(RunRecord),
    Failed(RunKey, String),
}

fn run_lineage(
    keys: &[RunKey],
    settings: &CellSettings,
    completed: &BTreeMap<RunKey, RunRecord>,
    sink: &(dyn Fn(&RunRecord) + Sync),
) -> Vec<Step> {
    let mut out = Vec::with_capacity(keys.len());
    let mut previous: Option<RunRecord> = None;
    for key in keys {
        let parent = previous
            .as_ref()
            .filter(|p| p.cell.layers + 1 == key.cell.layers)
            .map(WarmStart::from)
            .or_else(|| {
                // resumed lineage: look up the parent among completed records
                let parent = RunKey {
                    cell: Cell::new(key.cell.layers.wrapping_sub(1), key.cell.n_spins, key.cell.tier),
                    seed: key.seed,
                };
                completed.get(&parent).map(WarmStart::from)
            });
        if let Some(done) = completed.get(key) {
            previous = Some(done.clone());
            out.push(Step::Reused(done.clone()));
            continue;
        }
        match optimize_cell(key.cell, settings, key.seed, parent.as_ref()) {
            Ok(r) => {
                sink(&r);
                previous = Some(r.clone());
                out.push(Step::Computed(r));
            }
            Err(e) => {
                log::warn!("cell {} seed {} failed: {e}", key.cell.label(), key.seed);
                previous = None;
                out.push(Step::Failed(*key, e.to_string()));
            }
        }
    }
    out
}

/// Runs every missing `(cell, seed)` of `spec`. Records already present in
/// `completed` are reused; `sink` sees each newly computed record.
pub fn run_grid(
    spec: &GridSpec,
    settings: &CellSettings,
    completed: &BTreeMap<RunKey, RunRecord>,
    sink: &(dyn Fn(&RunRecord) + Sync),
) -> Result<GridOutcome> {
    spec.validate()?;
    let mut lineages: BTreeMap<(usize, DecoderTier, u64), Vec<RunKey>> = BTreeMap::new();
    for key in spec.keys() {
        lineages
            .entry((key.cell.n_spins, key.cell.tier, key.seed))
            .or_default()
            .push(key);
    }
    let lineages: Vec<Vec<RunKey>> = lineages.into_values().collect();
    let steps = par::map(&lineages, |keys| run_lineage(keys, settings, completed, sink));

    let mut outcome = GridOutcome::default();
    for step in steps.into_iter().flatten() {
        match step {
            Step::Reused(r) | Step::Computed(r) => outcome.records.push(r),
            Step::Failed(k, e) => outcome.failures.push((k, e)),
        }
    }
    outcome.records.sort_by_key(RunKey::of);
    outcome.failures.sort_by_key(|(k, _)| *k);
    Ok(outcome)
}
