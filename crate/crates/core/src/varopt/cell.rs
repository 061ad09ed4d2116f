//! Joint encoder/decoder optimization of one grid cell.

use std::time::Instant;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ansatz::{AnsatzParams, Evolution, Layer, ProbeCircuit};
use super::cmaes::{cma_es_minimize, CmaesOptions, StopReason};
use super::decoder::{DecoderSpec, DecoderTier};
use crate::chain::{ChainConfig, ParameterPoint};
use crate::error::{Error, Result};
use crate::fisher::{log_det_objective, FimEvaluator, FisherMatrix, DEFAULT_LAMBDA};
use crate::qsim::StateVector;
use crate::rng;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub layers: usize,
    pub n_spins: usize,
    pub tier: DecoderTier,
}

impl Cell {
    pub fn new(layers: usize, n_spins: usize, tier: DecoderTier) -> Self {
        Self { layers, n_spins, tier }
    }

    /// `L3_N5_T1`
    pub fn label(&self) -> String {
        format!("L{}_N{}_{}", self.layers, self.n_spins, self.tier)
    }

    /// Encoder plus decoder coordinates.
    pub fn dim(&self) -> usize {
        3 * self.layers + self.tier.n_angles(self.n_spins)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub sigma0: f64,
    pub max_generations: usize,
    pub max_evaluations: usize,
    pub population: Option<usize>,
    /// Standard deviation of the appended layer on warm starts.
    pub new_layer_std: f64,
    pub lambda: f64,
    pub tol_fun: f64,
    pub tol_x: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let c = CmaesOptions::default();
        Self {
            sigma0: c.sigma0,
            max_generations: c.max_generations,
            max_evaluations: c.max_evaluations,
            population: None,
            new_layer_std: 0.01,
            lambda: DEFAULT_LAMBDA,
            tol_fun: c.tol_fun,
            tol_x: c.tol_x,
        }
    }
}

/// Everything shared by the cells of a grid. `chain.n_spins` is overridden
/// per cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellSettings {
    pub chain: ChainConfig,
    pub point: ParameterPoint,
    pub optimizer: OptimizerSettings,
    pub evolution: Evolution,
}

impl CellSettings {
    pub fn chain_for(&self, n_spins: usize) -> Result<ChainConfig> {
        let cfg = ChainConfig { n_spins, ..self.chain };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Starting point carried over from the previous depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    pub encoder: AnsatzParams,
    pub decoder: Option<DecoderSpec>,
}

impl From<&RunRecord> for WarmStart {
    fn from(r: &RunRecord) -> Self {
        Self {
            encoder: r.params.clone(),
            decoder: Some(r.decoder.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub cell: Cell,
    pub seed: u64,
    pub settings: CellSettings,
    pub warm_started: bool,
    /// `log det(F + lambda I)` at the best point.
    pub objective: f64,
    pub det_f: f64,
    pub initial_objective: f64,
    pub params: AnsatzParams,
    pub decoder: DecoderSpec,
    pub fim: FisherMatrix,
    /// `[re, im]` per basis state.
    pub probe: Vec<[f64; 2]>,
    pub evaluations: usize,
    pub generations: usize,
    pub stop: StopReason,
    /// Best-so-far objective after each generation.
    pub trajectory: Vec<f64>,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn probe_state(&self) -> Result<StateVector> {
        StateVector::normalized(
            self.probe
                .iter()
                .map(|[re, im]| num_complex::Complex64::new(*re, *im))
                .collect(),
        )
    }

    /// Same payload with the timing zeroed, for determinism checks.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

/// Fitness evaluation for one cell.
#[derive(Clone, Debug)]
pub struct CellObjective {
    cell: Cell,
    cfg: ChainConfig,
    point: ParameterPoint,
    lambda: f64,
    circuit: ProbeCircuit,
}

impl CellObjective {
    pub fn new(cell: Cell, settings: &CellSettings) -> Result<Self> {
        if cell.layers == 0 {
            return Err(Error::InvalidConfig("cell needs at least one layer".into()));
        }
        let cfg = settings.chain_for(cell.n_spins)?;
        Ok(Self {
            cell,
            cfg,
            point: settings.point,
            lambda: settings.optimizer.lambda,
            circuit: ProbeCircuit::new(&cfg, settings.evolution)?,
        })
    }

    pub fn split(&self, x: &[f64]) -> Result<(AnsatzParams, DecoderSpec)> {
        if x.len() != self.cell.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.cell.dim(),
                actual: x.len(),
            });
        }
        let enc = 3 * self.cell.layers;
        Ok((
            AnsatzParams::from_flat(&x[..enc])?,
            DecoderSpec::new(self.cell.tier, self.cell.n_spins, x[enc..].to_vec())?,
        ))
    }

    pub fn evaluate(&self, params: &AnsatzParams, decoder: &DecoderSpec) -> Result<(StateVector, FisherMatrix)> {
        let psi = self.circuit.prepare(params)?;
        let fim = FimEvaluator::new(&self.cfg, self.point, decoder)?.classical_fim(&psi)?;
        Ok((psi, fim))
    }

    /// `log det(F + lambda I)`, or `-inf` when the point is invalid.
    pub fn fitness(&self, x: &[f64]) -> f64 {
        self.split(x)
            .and_then(|(p, d)| self.evaluate(&p, &d))
            .and_then(|(_, f)| log_det_objective(&f, self.lambda))
            .ok()
            .filter(|v| !v.is_nan())
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Mean of a fresh run: zero encoder and the Ramsey point for the decoder.
fn fresh_mean(cell: Cell) -> Vec<f64> {
    let mut x = vec![0.0; 3 * cell.layers];
    x.extend(DecoderSpec::ramsey(cell.tier, cell.n_spins).angles);
    x
}

/// `(mean, reference)`: the CMA-ES mean and the same point with the new
/// layer exactly zero.
fn warm_mean(cell: Cell, warm: &WarmStart, std: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if warm.encoder.n_layers() + 1 != cell.layers {
        return Err(Error::InvalidConfig(format!(
            "warm start has {} layers, cell {} needs {}",
            warm.encoder.n_layers(),
            cell.label(),
            cell.layers - 1
        )));
    }
    let decoder = match &warm.decoder {
        Some(d) if d.tier == cell.tier => {
            d.validate(cell.n_spins)?;
            d.angles.clone()
        }
        _ => DecoderSpec::ramsey(cell.tier, cell.n_spins).angles,
    };
    let mut layers = warm.encoder.layers.clone();
    layers.push(Layer::default());
    let mut reference = AnsatzParams::new(layers)?.to_flat();
    reference.extend(&decoder);

    let noise = Normal::new(0.0, std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = rng::stream(seed, 1 + cell.layers as u64);
    let mut mean = reference.clone();
    let base = 3 * (cell.layers - 1);
    for v in &mut mean[base..base + 3] {
        *v += noise.sample(&mut rng);
    }
    Ok((mean, reference))
}

pub fn optimize_cell(cell: Cell, settings: &CellSettings, seed: u64, warm: Option<&WarmStart>) -> Result<RunRecord> {
    let start = Instant::now();
    let objective = CellObjective::new(cell, settings)?;
    let (mean, reference) = match warm {
        Some(w) => warm_mean(cell, w, settings.optimizer.new_layer_std, seed)?,
        None => {
            let m = fresh_mean(cell);
            (m.clone(), m)
        }
    };
    let initial_objective = objective.fitness(&reference);

    let opt = &settings.optimizer;
    let opts = CmaesOptions {
        sigma0: opt.sigma0,
        max_generations: opt.max_generations,
        max_evaluations: opt.max_evaluations,
        population: opt.population,
        seed,
        tol_fun: opt.tol_fun,
        tol_x: opt.tol_x,
    };
    let res = cma_es_minimize(|x| -objective.fitness(x), &mean, &opts);

    let (best_x, best_value) = if -res.f >= initial_objective {
        (res.x, -res.f)
    } else {
        (reference, initial_objective)
    };
    let trajectory = res.trajectory.iter().map(|f| (-f).max(initial_objective)).collect();
    let (params, decoder) = objective.split(&best_x)?;
    let (psi, fim) = objective.evaluate(&params, &decoder)?;

    Ok(RunRecord {
        schema_version: SCHEMA_VERSION,
        cell,
        seed,
        settings: *settings,
        warm_started: warm.is_some(),
        objective: best_value,
        det_f: fim.det(),
        initial_objective,
        params,
        decoder,
        fim,
        probe: psi.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
        evaluations: res.evaluations + 1,
        generations: res.generations,
        stop: res.stop,
        trajectory,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Re-evaluates a record's best point under another propagator.
pub fn rescore(record: &RunRecord, evolution: Evolution) -> Result<FisherMatrix> {
    let settings = CellSettings {
        evolution,
        ..record.settings
    };
    let objective = CellObjective::new(record.cell, &settings)?;
    Ok(objective.evaluate(&record.params, &record.decoder)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::sql_fim;

    fn quick() -> CellSettings {
        CellSettings {
            evolution: Evolution::Exact,
            optimizer: OptimizerSettings {
                max_generations: 40,
                ..OptimizerSettings::default()
            },
            ..CellSettings::default()
        }
    }

    #[test]
    fn zero_mean_starts_at_sql() {
        for n in 2..=5 {
            let r = optimize_cell(Cell::new(1, n, DecoderTier::T1), &quick(), 204, None).unwrap();
            let sql = sql_fim(n, 1.0).unwrap();
            let expected = log_det_objective(&sql, DEFAULT_LAMBDA).unwrap();
            assert!((r.initial_objective - expected).abs() < 1e-9, "N={n}");
            assert!(r.det_f >= sql.det() * (1.0 - 1e-6));
        }
    }

    #[test]
    fn trajectory_non_decreasing() {
        let r = optimize_cell(Cell::new(2, 3, DecoderTier::T2), &quick(), 604, None).unwrap();
        assert!(r.trajectory.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*r.trajectory.last().unwrap(), r.objective);
        assert_eq!(r.decoder.angles.len(), 2);
        assert_eq!(r.params.n_layers(), 2);
    }

    #[test]
    fn deterministic_modulo_timing() {
        let cell = Cell::new(1, 3, DecoderTier::T3);
        let a = optimize_cell(cell, &quick(), 1204, None).unwrap();
        let b = optimize_cell(cell, &quick(), 1204, None).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
    }

    #[test]
    fn warm_start_never_loses() {
        let s = quick();
        let l1 = optimize_cell(Cell::new(1, 4, DecoderTier::T1), &s, 2004, None).unwrap();
        let l2 = optimize_cell(Cell::new(2, 4, DecoderTier::T1), &s, 2004, Some(&WarmStart::from(&l1))).unwrap();
        assert!((l2.initial_objective - l1.objective).abs() < 1e-9);
        assert!(l2.objective >= l1.objective - 1e-6);
        assert!(l2.warm_started);
    }

    #[test]
    fn warm_start_depth_checked() {
        let s = quick();
        let l1 = optimize_cell(Cell::new(1, 2, DecoderTier::T1), &s, 1, None).unwrap();
        assert!(optimize_cell(Cell::new(3, 2, DecoderTier::T1), &s, 1, Some(&WarmStart::from(&l1))).is_err());
    }

    #[test]
    fn invalid_point_is_minus_infinity() {
        let obj = CellObjective::new(Cell::new(1, 2, DecoderTier::T1), &quick()).unwrap();
        assert_eq!(obj.fitness(&[0.0; 2]), f64::NEG_INFINITY);
        assert_eq!(obj.fitness(&[f64::NAN, 0.0, 0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn probe_round_trip() {
        let r = optimize_cell(Cell::new(1, 3, DecoderTier::T1), &quick(), 3004, None).unwrap();
        let psi = r.probe_state().unwrap();
        let (p, d) = CellObjective::new(r.cell, &r.settings)
            .unwrap()
            .split(&{
                let mut x = r.params.to_flat();
                x.extend(&r.decoder.angles);
                x
            })
            .unwrap();
        assert_eq!((p, d), (r.params.clone(), r.decoder.clone()));
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(rescore(&r, Evolution::Exact).unwrap().max_abs_diff(&r.fim) < 1e-12);
    }
}
