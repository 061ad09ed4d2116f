//! Post-processing of optimized probes and run records.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bounds::BoundsTable;
use crate::qsim::{basis_label, qubit_bit, StateVector};
use crate::varopt::{best_per_cell, Cell, DecoderTier, RunRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopState {
    pub index: usize,
    pub label: String,
    pub probability: f64,
    /// `m = sum_i (1 - 2 b_i) / 2`
    pub dicke_sector: f64,
}

/// Half-flip pair `0^a 1^(N-a)` and its complement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfFlipPair {
    pub zeros_first: usize,
    pub indices: [usize; 2],
    pub weights: [f64; 2],
}

impl HalfFlipPair {
    pub fn weight(&self) -> f64 {
        self.weights[0] + self.weights[1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotifReport {
    pub n_qubits: usize,
    pub top4: Vec<TopState>,
    pub cumulative_top4: f64,
    /// `[p(0...0), p(1...1)]`
    pub ghz_weights: [f64; 2],
    pub ghz_pair_weight: f64,
    /// The heavier of the candidate splits.
    pub halfflip_pair_weight: f64,
    pub halfflip_pairs: Vec<HalfFlipPair>,
    pub ghz_fidelity: f64,
    pub off_motif_weight: f64,
    /// Top-4 strings equal `{0^N, 1^N}` plus one half-flip pair.
    pub top4_is_motif: bool,
}

impl MotifReport {
    /// Heaviest half-flip pair.
    pub fn dominant_halfflip(&self) -> &HalfFlipPair {
        self.halfflip_pairs
            .iter()
            .max_by(|a, b| a.weight().total_cmp(&b.weight()))
            .expect("at least one split")
    }
}

pub fn dicke_sector(n: usize, k: usize) -> f64 {
    (0..n).map(|q| 0.5 * (1.0 - 2.0 * qubit_bit(n, k, q) as f64)).sum()
}

/// Candidate zero-run lengths `a` for `0^a 1^(N-a)`: `N/2` for even `N`,
/// both `ceil(N/2)` and `floor(N/2)` for odd `N`.
pub fn halfflip_splits(n: usize) -> Vec<usize> {
    if n.is_multiple_of(2) {
        vec![n / 2]
    } else {
        vec![n.div_ceil(2), n / 2]
    }
}

fn halfflip_indices(n: usize, zeros_first: usize) -> [usize; 2] {
    let low = (1usize << (n - zeros_first)) - 1;
    let all = (1usize << n) - 1;
    [low, all ^ low]
}

pub fn motif_report(psi: &StateVector) -> MotifReport {
    let n = psi.n_qubits();
    let p = psi.probabilities();
    // probabilities equal to 1e-12 count as ties
    let key = |k: usize| -> i64 { (p[k] * 1e12).round() as i64 };
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| key(b).cmp(&key(a)).then(a.cmp(&b)));
    let top4: Vec<TopState> = order
        .iter()
        .take(4)
        .map(|&k| TopState {
            index: k,
            label: basis_label(n, k),
            probability: p[k],
            dicke_sector: dicke_sector(n, k),
        })
        .collect();
    let cumulative_top4 = top4.iter().map(|t| t.probability).sum();

    let last = p.len() - 1;
    let ghz_weights = [p[0], p[last]];
    let ghz_pair_weight = p[0] + p[last];
    let halfflip_pairs: Vec<HalfFlipPair> = halfflip_splits(n)
        .into_iter()
        .map(|a| {
            let idx = halfflip_indices(n, a);
            HalfFlipPair {
                zeros_first: a,
                indices: idx,
                weights: [p[idx[0]], p[idx[1]]],
            }
        })
        .collect();
    let halfflip_pair_weight = halfflip_pairs.iter().map(HalfFlipPair::weight).fold(0.0, f64::max);

    let top_set: BTreeSet<usize> = top4.iter().map(|t| t.index).collect();
    let top4_is_motif = halfflip_pairs.iter().any(|h| {
        let motif: BTreeSet<usize> = [0, last, h.indices[0], h.indices[1]].into_iter().collect();
        motif.len() == 4 && motif == top_set
    });

    let a = psi.amplitudes();
    let overlap = (a[0] + a[last]) / std::f64::consts::SQRT_2;
    MotifReport {
        n_qubits: n,
        top4,
        cumulative_top4,
        ghz_weights,
        ghz_pair_weight,
        halfflip_pair_weight,
        halfflip_pairs,
        ghz_fidelity: overlap.norm_sqr(),
        off_motif_weight: (1.0 - ghz_pair_weight - halfflip_pair_weight).max(0.0),
        top4_is_motif,
    }
}

/// Order statistics of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            count: v.len(),
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }

    /// `(max - min) / |mean|` in percent.
    pub fn relative_spread_pct(&self) -> f64 {
        if self.count < 2 || self.max == self.min {
            0.0
        } else {
            100.0 * (self.max - self.min) / self.mean.abs()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationRow {
    pub layers: usize,
    pub n_spins: usize,
    pub tier: DecoderTier,
    pub best_seed: u64,
    pub best_det_f: f64,
    pub det_sql: f64,
    pub det_qstar: f64,
    pub ratio_to_sql: f64,
    pub ratio_to_qstar: f64,
    /// Over seeds, of `log det(F + lambda I)`.
    pub log_det_stats: Summary,
    pub log_det_spread_pct: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SaturationTable {
    pub rows: Vec<SaturationRow>,
    /// Requested cells without a record or without a bounds row.
    pub missing: Vec<Cell>,
}

impl SaturationTable {
    pub fn get(&self, cell: Cell) -> Option<&SaturationRow> {
        self.rows
            .iter()
            .find(|r| r.layers == cell.layers && r.n_spins == cell.n_spins && r.tier == cell.tier)
    }
}

/// Best-of-seeds ratios against the bounds table, one row per cell present
/// in both. `expected` lists cells whose absence should be reported.
pub fn saturation_table(records: &[RunRecord], bounds: &BoundsTable, expected: &[Cell]) -> SaturationTable {
    let best = best_per_cell(records);
    let mut by_cell: BTreeMap<Cell, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_cell.entry(r.cell).or_default().push(r.objective);
    }
    let mut table = SaturationTable::default();
    for (cell, rec) in &best {
        let Some(b) = bounds.row(cell.n_spins) else {
            table.missing.push(*cell);
            continue;
        };
        let stats = Summary::of(&by_cell[cell]).expect("cell has records");
        table.rows.push(SaturationRow {
            layers: cell.layers,
            n_spins: cell.n_spins,
            tier: cell.tier,
            best_seed: rec.seed,
            best_det_f: rec.det_f,
            det_sql: b.det_sql,
            det_qstar: b.det_qstar,
            ratio_to_sql: rec.det_f / b.det_sql,
            ratio_to_qstar: rec.det_f / b.det_qstar,
            log_det_stats: stats,
            log_det_spread_pct: stats.relative_spread_pct(),
        });
    }
    for cell in expected {
        if !best.contains_key(cell) && !table.missing.contains(cell) {
            table.missing.push(*cell);
        }
    }
    table.missing.sort();
    table
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub layers: usize,
    pub n_spins: usize,
    /// `ratio_to_qstar` per tier in `DecoderTier::ALL` order.
    pub ratios: [Option<f64>; 4],
    /// `max - min` over present tiers, percentage points.
    pub delta_pp: f64,
}

impl TierRow {
    /// `r(T_k) <= r(T_{k+1}) (1 + slack)` for consecutive present tiers.
    pub fn is_monotone(&self, slack: f64) -> bool {
        let present: Vec<f64> = self.ratios.iter().flatten().copied().collect();
        present.windows(2).all(|w| w[0] <= w[1] * (1.0 + slack))
    }
}

pub fn tier_matrix(table: &SaturationTable) -> Vec<TierRow> {
    let mut rows: BTreeMap<(usize, usize), [Option<f64>; 4]> = BTreeMap::new();
    for r in &table.rows {
        let slot = DecoderTier::ALL.iter().position(|t| *t == r.tier).expect("known tier");
        rows.entry((r.layers, r.n_spins)).or_default()[slot] = Some(r.ratio_to_qstar);
    }
    rows.into_iter()
        .map(|((layers, n_spins), ratios)| {
            let present: Vec<f64> = ratios.iter().flatten().copied().collect();
            let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
            TierRow {
                layers,
                n_spins,
                ratios,
                delta_pp: 100.0 * (hi - lo),
            }
        })
        .collect()
}

/// One row per record, for per-seed scatter and box plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub layers: usize,
    pub n_spins: usize,
    pub tier: DecoderTier,
    pub seed: u64,
    pub objective: f64,
    pub det_f: f64,
    pub ratio_to_qstar: Option<f64>,
    pub evaluations: usize,
    pub warm_started: bool,
}

pub fn seed_statistics(records: &[RunRecord], bounds: &BoundsTable) -> Vec<SeedRow> {
    let mut rows: Vec<SeedRow> = records
        .iter()
        .map(|r| SeedRow {
            layers: r.cell.layers,
            n_spins: r.cell.n_spins,
            tier: r.cell.tier,
            seed: r.seed,
            objective: r.objective,
            det_f: r.det_f,
            ratio_to_qstar: bounds.row(r.cell.n_spins).map(|b| r.det_f / b.det_qstar),
            evaluations: r.evaluations,
            warm_started: r.warm_started,
        })
        .collect();
    rows.sort_by_key(|r| (r.layers, r.n_spins, r.tier, r.seed));
    rows
}
