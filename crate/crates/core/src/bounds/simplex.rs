//! Best-found quantum benchmark on the probability simplex.
//!
//! Both generators are diagonal, so the pure-state QFIM depends on the probe
//! only through `p_k = |c_k|^2`. Maximizing `det Q(p)` over the simplex uses a
//! softmax pre-image `p = softmax(z)`: a multi-start L-BFGS pass from random
//! `z`, then differential evolution in a box around the best local solution
//! followed by a final L-BFGS polish.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::de::{self, DeOptions};
use crate::bounds::lbfgs::{self, LbfgsOptions};
use crate::chain::{ChainConfig, GeneratorTable};
use crate::error::{Error, Result};
use crate::fisher::{qfim_from_table, ProbabilityDistribution};
use crate::par;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplexOptions {
    pub restarts: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub de_population: usize,
    pub de_generations: usize,
    pub de_half_width: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            restarts: 50,
            seed: 0,
            init_scale: 1.0,
            de_population: 32,
            de_generations: 200,
            de_half_width: 0.5,
        }
    }
}

/// Outcome of one local restart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub det_q: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexSolution {
    pub p: ProbabilityDistribution,
    pub det_q: f64,
    pub restarts: usize,
    pub converged_restarts: usize,
    /// `max - min` over the five best restart values.
    pub top5_spread: f64,
    /// Gain of the refinement stage over the best restart.
    pub refinement_gain: f64,
    pub outcomes: Vec<RestartOutcome>,
}

impl SimplexSolution {
    /// `max_k |p_k - p_{2^N-1-k}|`.
    pub fn complement_asymmetry(&self) -> f64 {
        let p = self.p.as_slice();
        let last = p.len() - 1;
        (0..p.len()).fold(0.0f64, |m, k| m.max((p[k] - p[last - k]).abs()))
    }

    pub fn top5_relative_spread(&self) -> f64 {
        self.top5_spread / self.det_q.abs().max(1e-300)
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// `det Q(softmax(z))` and its gradient with respect to `z`.
#[derive(Clone, Debug)]
pub struct SimplexObjective {
    table: GeneratorTable,
    scale: f64,
}

impl SimplexObjective {
    pub fn new(cfg: &ChainConfig) -> Self {
        Self {
            table: cfg.generator_table(),
            scale: cfg.gamma_e_t * cfg.gamma_e_t,
        }
    }

    pub fn dim(&self) -> usize {
        self.table.len()
    }

    pub fn det_at_p(&self, p: &[f64]) -> f64 {
        qfim_from_table(p, &self.table, self.scale.sqrt()).det()
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.det_at_p(&softmax(z))
    }

    /// Returns `det Q` and writes `d det Q / d z` into `grad`.
    pub fn value_and_gradient(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let p = softmax(z);
        let (lb, lg) = (&self.table.lam_b, &self.table.lam_g);
        let (mut mb, mut mg, mut sbb, mut sgg, mut sbg) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..p.len() {
            mb += p[k] * lb[k];
            mg += p[k] * lg[k];
            sbb += p[k] * lb[k] * lb[k];
            sgg += p[k] * lg[k] * lg[k];
            sbg += p[k] * lb[k] * lg[k];
        }
        let (cbb, cgg, cbg) = (sbb - mb * mb, sgg - mg * mg, sbg - mb * mg);
        let s = 16.0 * self.scale * self.scale;
        let det = s * (cbb * cgg - cbg * cbg);
        // derivative with respect to p_k, then through the softmax Jacobian
        let mut dp = vec![0.0; p.len()];
        for k in 0..p.len() {
            let dbb = lb[k] * lb[k] - 2.0 * mb * lb[k];
            let dgg = lg[k] * lg[k] - 2.0 * mg * lg[k];
            let dbg = lb[k] * lg[k] - mb * lg[k] - mg * lb[k];
            dp[k] = s * (dbb * cgg + cbb * dgg - 2.0 * cbg * dbg);
        }
        let mean: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
        for k in 0..p.len() {
            grad[k] = p[k] * (dp[k] - mean);
        }
        det
    }
}

struct LocalResult {
    z: Vec<f64>,
    det_q: f64,
    converged: bool,
    iterations: usize,
}

fn local_maximize(obj: &SimplexObjective, z0: &[f64]) -> LocalResult {
    let opts = LbfgsOptions::default();
    let r = lbfgs::minimize(
        |z, g| {
            let v = obj.value_and_gradient(z, g);
            g.iter_mut().for_each(|x| *x = -*x);
            -v
        },
        z0,
        &opts,
    );
    LocalResult {
        det_q: -r.f,
        z: r.x,
        converged: r.converged,
        iterations: r.iterations,
    }
}

/// Random softmax pre-image for restart `index`.
pub fn restart_start(dim: usize, opts: &SimplexOptions, index: usize) -> Vec<f64> {
    let mut rng = rng::stream(opts.seed, index as u64);
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            opts.init_scale * z
        })
        .collect()
}

/// One local restart; exposed so benchmarks can drive restarts directly.
pub fn run_restart(obj: &SimplexObjective, opts: &SimplexOptions, index: usize) -> (Vec<f64>, RestartOutcome) {
    let z0 = restart_start(obj.dim(), opts, index);
    let r = local_maximize(obj, &z0);
    (
        r.z,
        RestartOutcome {
            det_q: r.det_q,
            converged: r.converged,
            iterations: r.iterations,
        },
    )
}

pub fn optimize_simplex_benchmark(cfg: &ChainConfig, opts: &SimplexOptions) -> Result<SimplexSolution> {
    cfg.validate()?;
    if cfg.n_spins > 8 {
        return Err(Error::InvalidConfig(format!(
            "simplex benchmark is limited to 8 spins, got {}",
            cfg.n_spins
        )));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidConfig(
            "simplex benchmark needs at least one restart".into(),
        ));
    }
    let obj = SimplexObjective::new(cfg);
    let results = par::map_range(opts.restarts, |i| run_restart(&obj, opts, i));

    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| results[b].1.det_q.total_cmp(&results[a].1.det_q));
    let top: Vec<f64> = order.iter().take(5).map(|&i| results[i].1.det_q).collect();
    let top5_spread =
        top.iter().copied().fold(f64::NEG_INFINITY, f64::max) - top.iter().copied().fold(f64::INFINITY, f64::min);

    let best_local = &results[order[0]].0;
    let best_local_det = results[order[0]].1.det_q;

    let lower: Vec<f64> = best_local.iter().map(|v| v - opts.de_half_width).collect();
    let upper: Vec<f64> = best_local.iter().map(|v| v + opts.de_half_width).collect();
    let de_opts = DeOptions {
        population: opts.de_population,
        generations: opts.de_generations,
        ..DeOptions::default()
    };
    let mut de_rng = rng::stream(opts.seed, u64::MAX);
    let refined = de::minimize(
        |z| -obj.value(z),
        &lower,
        &upper,
        Some(best_local),
        &de_opts,
        &mut de_rng,
    );
    let polished = local_maximize(&obj, &refined.x);

    let (z, det_q) = if polished.det_q >= -refined.f {
        (polished.z, polished.det_q)
    } else {
        (refined.x, -refined.f)
    };
    let (z, det_q) = if det_q >= best_local_det {
        (z, det_q)
    } else {
        (best_local.clone(), best_local_det)
    };

    let outcomes: Vec<RestartOutcome> = results.into_iter().map(|(_, o)| o).collect();
    Ok(SimplexSolution {
        p: ProbabilityDistribution::new(softmax(&z))?,
        det_q,
        restarts: opts.restarts,
        converged_restarts: outcomes.iter().filter(|o| o.converged).count(),
        top5_spread,
        refinement_gain: det_q - best_local_det,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[1000.0, 0.0, -3.0, 2.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = ChainConfig::new(4).unwrap();
        let obj = SimplexObjective::new(&cfg);
        let z = restart_start(obj.dim(), &SimplexOptions::default(), 3);
        let mut g = vec![0.0; obj.dim()];
        obj.value_and_gradient(&z, &mut g);
        let h = 1e-6;
        for k in 0..obj.dim() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[k] += h;
            zm[k] -= h;
            let fd = (obj.value(&zp) - obj.value(&zm)) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()),
                "k={k} fd={fd} g={}",
                g[k]
            );
        }
    }

    #[test]
    fn n2_benchmark_is_one() {
        let sol = optimize_simplex_benchmark(&ChainConfig::new(2).unwrap(), &SimplexOptions::default()).unwrap();
        assert!((sol.det_q - 1.0).abs() < 1e-6, "{}", sol.det_q);
    }

    #[test]
    fn n3_benchmark() {
        let sol = optimize_simplex_benchmark(&ChainConfig::new(3).unwrap(), &SimplexOptions::default()).unwrap();
        assert!((sol.det_q - 10.125).abs() < 1e-3, "{}", sol.det_q);
        let q = crate::fisher::qfim_simplex(&sol.p, &ChainConfig::new(3).unwrap()).unwrap();
        assert!((q.det() - sol.det_q).abs() < 1e-9);
    }

    #[test]
    fn rejects_large_chains() {
        let cfg = ChainConfig::new(9).unwrap();
        assert!(optimize_simplex_benchmark(&cfg, &SimplexOptions::default()).is_err());
    }
}
