use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use dipolar_sense::analysis::{
    motif_report, saturation_table, seed_statistics, tier_matrix, MotifReport, SaturationTable, SeedRow, TierRow,
};
use dipolar_sense::bounds::{BoundsTable, SimplexOptions};
use dipolar_sense::varopt::{best_per_cell, run_grid, Cell, DecoderTier, RunKey, RunRecord};

use crate::config::{ChainSection, ExperimentConfig};
use crate::filter::CellFilter;
use crate::store::{load_record, same_settings, write_atomic, write_json, Manifest, ManifestWriter, Status};

pub const BOUNDS_JSON: &str = "bounds.json";
pub const BOUNDS_CSV: &str = "bounds.csv";
pub const ANALYSIS_DIR: &str = "analysis";

/// Fixed-width scientific notation, 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().context("flushing csv")?;
    write_atomic(path, &bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsFile {
    pub chain: ChainSection,
    pub simplex: SimplexOptions,
    pub table: BoundsTable,
}

pub fn cmd_bounds(cfg: &ExperimentConfig, out: &Path) -> Result<BoundsTable> {
    let opts = cfg.simplex_options();
    let template = cfg.chain_config(cfg.chain.n_spins[0])?;
    log::info!(
        "simplex benchmark for N = {:?} ({} restarts)",
        cfg.chain.n_spins,
        opts.restarts
    );
    let table = BoundsTable::compute(&template, &cfg.chain.n_spins, &opts)?;
    write_json(
        &out.join(BOUNDS_JSON),
        &BoundsFile {
            chain: cfg.chain.clone(),
            simplex: opts,
            table: table.clone(),
        },
    )?;
    let rows = table.rows.iter().map(|r| {
        vec![
            r.n_spins.to_string(),
            fmt_f64(r.det_sql),
            fmt_f64(r.log_det_sql),
            fmt_f64(r.det_qstar),
            fmt_f64(r.log_det_qstar),
            r.restarts.to_string(),
            r.converged_restarts.to_string(),
            fmt_f64(r.top5_spread),
            r.lower_bound.to_string(),
        ]
    });
    write_csv(
        &out.join(BOUNDS_CSV),
        &[
            "n_spins",
            "det_sql",
            "log_det_sql",
            "det_qstar",
            "log_det_qstar",
            "restarts",
            "converged_restarts",
            "top5_spread",
            "lower_bound",
        ],
        rows,
    )?;
    for r in &table.rows {
        log::info!("N={} det Q_SQL={} det Q*={:.6}", r.n_spins, r.det_sql, r.det_qstar);
    }
    Ok(table)
}

/// Cached bounds when they were computed for the same chain and simplex
/// options, freshly computed otherwise.
fn bounds_for(cfg: &ExperimentConfig, out: &Path) -> Result<BoundsTable> {
    let path = out.join(BOUNDS_JSON);
    if let Ok(text) = std::fs::read_to_string(&path) {
        match serde_json::from_str::<BoundsFile>(&text) {
            Ok(b) if b.chain == cfg.chain && b.simplex == cfg.simplex_options() => return Ok(b.table),
            Ok(_) => log::warn!("{} was computed for another configuration; recomputing", path.display()),
            Err(e) => log::warn!("ignoring unreadable {}: {e}", path.display()),
        }
    }
    cmd_bounds(cfg, out)
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub requested: usize,
    pub computed: usize,
    pub reused: usize,
    pub failed: usize,
}

impl RunSummary {
    pub fn ok(&self) -> bool {
        self.failed == 0 && self.computed + self.reused == self.requested
    }
}

pub fn cmd_run(cfg: &ExperimentConfig, out: &Path, filter: &CellFilter, resume: bool) -> Result<RunSummary> {
    let spec = filter.restrict(&cfg.grid_spec())?;
    let settings = cfg.cell_settings()?;
    let keys = spec.keys();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(&out.join("config.toml"), cfg.to_toml()?.as_bytes())?;

    // Records outside the selection only serve as warm-start parents; inside
    // it they are reused on --resume.
    let manifest = Manifest::load_or_default(out)?;
    let mut completed: BTreeMap<RunKey, RunRecord> = BTreeMap::new();
    for e in manifest.ok_entries() {
        let key = e.key();
        let requested = keys.contains(&key);
        if requested && !resume {
            continue;
        }
        match load_record(out, e) {
            Ok(r) if same_settings(&r, &settings) => {
                completed.insert(key, r);
            }
            Ok(_) if requested => log::info!("{} seed {}: settings changed, recomputing", key.cell.label(), key.seed),
            Ok(_) => {}
            Err(err) if requested => log::warn!("{err:#}; recomputing"),
            Err(_) => {}
        }
    }
    let reused = keys.iter().filter(|k| completed.contains_key(k)).count();
    let todo = keys.len() - reused;
    log::info!(
        "{} runs requested, {reused} reused, {todo} to compute with {}",
        keys.len(),
        settings.evolution.describe()
    );

    let writer = ManifestWriter::new(out, manifest);
    let done = AtomicUsize::new(0);
    let io_errors = Mutex::new(Vec::new());
    let sink = |r: &RunRecord| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        log::info!(
            "[{k}/{todo}] {} seed {}: log det = {:.6} ({:.1} s)",
            r.cell.label(),
            r.seed,
            r.objective,
            r.wall_time_s
        );
        if let Err(e) = writer.record(r) {
            log::error!("{e:#}");
            io_errors.lock().expect("error list").push(e);
        }
    };
    let outcome = run_grid(&spec, &settings, &completed, &sink)?;
    for (key, err) in &outcome.failures {
        writer.failure(key, err)?;
    }
    if let Some(e) = io_errors.into_inner().expect("error list").into_iter().next() {
        return Err(e);
    }
    writer.into_inner();
    Ok(RunSummary {
        requested: keys.len(),
        computed: outcome.records.len() - reused,
        reused,
        failed: outcome.failures.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMotif {
    pub cell: Cell,
    pub seed: u64,
    pub det_f: f64,
    pub report: MotifReport,
}

#[derive(Debug, Default)]
pub struct AnalyzeSummary {
    pub records: usize,
    /// Requested runs without a record.
    pub absent: usize,
    /// Requested cells without any record.
    pub missing: Vec<Cell>,
}

impl AnalyzeSummary {
    pub fn ok(&self) -> bool {
        self.absent == 0
    }
}

pub fn cmd_analyze(cfg: &ExperimentConfig, out: &Path, filter: &CellFilter) -> Result<AnalyzeSummary> {
    let manifest = Manifest::load(out)?;
    let spec = filter.restrict(&cfg.grid_spec())?;
    let keys = spec.keys();
    let mut records = Vec::new();
    for e in &manifest.entries {
        let key = e.key();
        if !keys.contains(&key) {
            continue;
        }
        match e.status {
            Status::Ok => records.push(load_record(out, e)?),
            Status::Failed => log::warn!(
                "{} seed {} failed: {}",
                key.cell.label(),
                key.seed,
                e.error.as_deref().unwrap_or("")
            ),
        }
    }
    let have: Vec<RunKey> = records.iter().map(RunKey::of).collect();
    let absent = keys.iter().filter(|k| !have.contains(k)).count();
    if absent > 0 {
        log::warn!("{absent} of {} requested runs have no record", keys.len());
    }

    let bounds = bounds_for(cfg, out)?;
    let mut cells: Vec<Cell> = keys.iter().map(|k| k.cell).collect();
    cells.dedup();
    let table = saturation_table(&records, &bounds, &cells);
    for c in &table.missing {
        log::warn!("cell {} has no records", c.label());
    }
    let tiers = tier_matrix(&table);
    let seeds = seed_statistics(&records, &bounds);
    let motifs: Vec<CellMotif> = best_per_cell(&records)
        .into_values()
        .map(|r| {
            Ok(CellMotif {
                cell: r.cell,
                seed: r.seed,
                det_f: r.det_f,
                report: motif_report(&r.probe_state()?),
            })
        })
        .collect::<Result<_>>()?;

    let dir = out.join(ANALYSIS_DIR);
    write_saturation(&dir, &table)?;
    write_json(&dir.join("saturation.json"), &table)?;
    write_tiers(&dir.join("tier_matrix.csv"), &tiers)?;
    write_seeds(&dir.join("seed_statistics.csv"), &seeds)?;
    write_motif_table(&dir.join("motifs.csv"), &motifs)?;
    for m in &motifs {
        write_json(&dir.join("motifs").join(format!("{}.json", m.cell.label())), m)?;
    }
    write_figures(&dir.join("figures"), &table, &tiers, &seeds, &motifs)?;
    log::info!("analysis of {} records written to {}", records.len(), dir.display());
    Ok(AnalyzeSummary {
        records: records.len(),
        absent,
        missing: table.missing.clone(),
    })
}

const SATURATION_HEADER: [&str; 17] = [
    "layers",
    "n_spins",
    "tier",
    "best_seed",
    "best_det_f",
    "det_sql",
    "det_qstar",
    "ratio_to_sql",
    "ratio_to_qstar",
    "log_det_count",
    "log_det_min",
    "log_det_q1",
    "log_det_median",
    "log_det_q3",
    "log_det_max",
    "log_det_mean",
    "log_det_spread_pct",
];

fn write_saturation(dir: &Path, table: &SaturationTable) -> Result<()> {
    let rows = table.rows.iter().map(|r| {
        let s = &r.log_det_stats;
        vec![
            r.layers.to_string(),
            r.n_spins.to_string(),
            r.tier.to_string(),
            r.best_seed.to_string(),
            fmt_f64(r.best_det_f),
            fmt_f64(r.det_sql),
            fmt_f64(r.det_qstar),
            fmt_f64(r.ratio_to_sql),
            fmt_f64(r.ratio_to_qstar),
            s.count.to_string(),
            fmt_f64(s.min),
            fmt_f64(s.q1),
            fmt_f64(s.median),
            fmt_f64(s.q3),
            fmt_f64(s.max),
            fmt_f64(s.mean),
            fmt_f64(r.log_det_spread_pct),
        ]
    });
    write_csv(&dir.join("saturation.csv"), &SATURATION_HEADER, rows)
}

fn write_tiers(path: &Path, tiers: &[TierRow]) -> Result<()> {
    let mut header = vec!["layers", "n_spins"];
    header.extend(DecoderTier::ALL.iter().map(|t| t.label()));
    header.push("delta_pp");
    let rows = tiers.iter().map(|r| {
        let mut row = vec![r.layers.to_string(), r.n_spins.to_string()];
        row.extend(r.ratios.iter().map(|v| fmt_opt(*v)));
        row.push(fmt_f64(r.delta_pp));
        row
    });
    write_csv(path, &header, rows)
}

fn write_seeds(path: &Path, seeds: &[SeedRow]) -> Result<()> {
    let rows = seeds.iter().map(|r| {
        vec![
            r.layers.to_string(),
            r.n_spins.to_string(),
            r.tier.to_string(),
            r.seed.to_string(),
            fmt_f64(r.objective),
            fmt_f64(r.det_f),
            fmt_opt(r.ratio_to_qstar),
            r.evaluations.to_string(),
            r.warm_started.to_string(),
        ]
    });
    write_csv(
        path,
        &[
            "layers",
            "n_spins",
            "tier",
            "seed",
            "log_det",
            "det_f",
            "ratio_to_qstar",
            "evaluations",
            "warm_started",
        ],
        rows,
    )
}

fn write_motif_table(path: &Path, motifs: &[CellMotif]) -> Result<()> {
    let mut header: Vec<String> = ["layers", "n_spins", "tier", "seed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in 1..=4 {
        header.push(format!("top{k}_label"));
        header.push(format!("top{k}_probability"));
    }
    header.extend(
        [
            "cumulative_top4",
            "ghz_pair_weight",
            "halfflip_pair_weight",
            "ghz_fidelity",
            "off_motif_weight",
            "top4_is_motif",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = motifs.iter().map(|m| {
        let r = &m.report;
        let mut row = vec![
            m.cell.layers.to_string(),
            m.cell.n_spins.to_string(),
            m.cell.tier.to_string(),
            m.seed.to_string(),
        ];
        for k in 0..4 {
            match r.top4.get(k) {
                Some(t) => row.extend([t.label.clone(), fmt_f64(t.probability)]),
                None => row.extend([String::new(), String::new()]),
            }
        }
        row.extend([
            fmt_f64(r.cumulative_top4),
            fmt_f64(r.ghz_pair_weight),
            fmt_f64(r.halfflip_pair_weight),
            fmt_f64(r.ghz_fidelity),
            fmt_f64(r.off_motif_weight),
            r.top4_is_motif.to_string(),
        ]);
        row
    });
    write_csv(path, &header, rows)
}

/// One data file per figure: `scaling`, `motif`, `seeds` and `tiers`.
fn write_figures(
    dir: &Path,
    table: &SaturationTable,
    tiers: &[TierRow],
    seeds: &[SeedRow],
    motifs: &[CellMotif],
) -> Result<()> {
    let rows = table.rows.iter().filter(|r| r.tier == DecoderTier::T1).map(|r| {
        vec![
            r.layers.to_string(),
            r.n_spins.to_string(),
            fmt_f64(r.best_det_f.ln()),
            fmt_f64(r.det_sql.ln()),
            fmt_f64(r.det_qstar.ln()),
            fmt_f64(r.ratio_to_qstar),
        ]
    });
    write_csv(
        &dir.join("scaling.csv"),
        &[
            "layers",
            "n_spins",
            "log_det_f",
            "log_det_sql",
            "log_det_qstar",
            "ratio_to_qstar",
        ],
        rows,
    )?;

    let rows = motifs.iter().flat_map(|m| {
        m.report.top4.iter().enumerate().map(move |(rank, t)| {
            vec![
                m.cell.layers.to_string(),
                m.cell.n_spins.to_string(),
                m.cell.tier.to_string(),
                m.seed.to_string(),
                (rank + 1).to_string(),
                t.index.to_string(),
                t.label.clone(),
                fmt_f64(t.probability),
                fmt_f64(t.dicke_sector),
            ]
        })
    });
    write_csv(
        &dir.join("motif.csv"),
        &[
            "layers",
            "n_spins",
            "tier",
            "seed",
            "rank",
            "index",
            "label",
            "probability",
            "dicke_sector",
        ],
        rows,
    )?;

    let rows = seeds.iter().map(|r| {
        vec![
            r.layers.to_string(),
            r.n_spins.to_string(),
            r.tier.to_string(),
            r.seed.to_string(),
            fmt_f64(r.objective),
        ]
    });
    write_csv(
        &dir.join("seeds.csv"),
        &["layers", "n_spins", "tier", "seed", "log_det"],
        rows,
    )?;

    write_tiers(&dir.join("tiers.csv"), tiers)
}

pub fn resolve_out(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| cfg.output.clone())
}
